//! Switchable single-site faults for mutation-style evaluation of the
//! relation suites.
//!
//! Each fault is a named hook at one site in the reference pipeline. At most
//! one fault is active per process at any time; [`activate`] hands out a
//! guard that holds a process-wide lock for as long as the fault is live, so
//! two faults can never overlap in one address space.

use std::sync::atomic::{AtomicU8, Ordering};
use std::sync::{Mutex, MutexGuard, OnceLock};

use serde::{Deserialize, Serialize};

/// One switchable bug in the reference pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultId {
    CorrMissingSqrt,
    CorrNumeratorNegated,
    CorrNumeratorUncentered,
    CorrMeanSkipsDivide,
    CorrUndefinedAsNan,
    CorrClampSkipped,
    CorrScreenSkipped,
    CorrMissingAsZero,
    CorrMissingChecksXOnly,
    RankBySignedR,
    RankAscending,
    NormFitOnValidation,
    WindowCountOffByOne,
    WindowStrideTwo,
    WindowTargetOverlap,
    DenormDropsMin,
    DenormUsesMax,
    NormDividesByMin,
    LoaderSkipsSort,
    RangeGuardUsesMax,
    TrainShuffleDisabled,
    GradClipDisabled,
    ForgetBiasZero,
    TrainLossSumNotMean,
    EvalSkipsFirstWindow,
    EvalClipsNormalized,
    EvalLossDenormalized,
    BaselineSdPopulation,
}

/// Mutation class of a catalogued fault, mirroring common mutation-testing
/// operator families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MutationClass {
    ArithmeticOperator,
    ComparisonOperator,
    ConstantReplacement,
    BoundaryShift,
    StatementSkip,
    DataLeakage,
}

/// Catalog entry: where the fault lives, what it does, and which relations
/// are documented (and verified) to kill it. An empty killer list marks an
/// expected survivor.
#[derive(Debug, Clone, Serialize)]
pub struct FaultSpec {
    pub id: FaultId,
    pub site: &'static str,
    pub class: MutationClass,
    pub description: &'static str,
    pub expected_killers: &'static [&'static str],
}

impl FaultId {
    /// Stable kebab-case identifier used on the CLI and in reports.
    pub fn id(self) -> &'static str {
        self.spec().idstr
    }

    pub fn parse(s: &str) -> Option<FaultId> {
        ALL.iter().find(|e| e.idstr == s).map(|e| e.fault)
    }

    pub fn all() -> Vec<FaultId> {
        ALL.iter().map(|e| e.fault).collect()
    }

    fn spec(self) -> &'static Entry {
        &ALL[self as usize]
    }
}

struct Entry {
    fault: FaultId,
    idstr: &'static str,
    site: &'static str,
    class: MutationClass,
    description: &'static str,
    expected_killers: &'static [&'static str],
}

use FaultId::*;
use MutationClass::*;

// Order must match the enum: `FaultId as usize` indexes this table.
static ALL: &[Entry] = &[
    Entry {
        fault: CorrMissingSqrt,
        idstr: "corr-missing-sqrt",
        site: "correlation.pearson",
        class: ArithmeticOperator,
        description: "denominator uses sxx*syy without the square root",
        expected_killers: &["CMR-4", "CMR-5"],
    },
    Entry {
        fault: CorrNumeratorNegated,
        idstr: "corr-numerator-negated",
        site: "correlation.pearson",
        class: ArithmeticOperator,
        description: "covariance sum negated",
        expected_killers: &["CMR-4"],
    },
    Entry {
        fault: CorrNumeratorUncentered,
        idstr: "corr-numerator-uncentered",
        site: "correlation.pearson",
        class: StatementSkip,
        description: "numerator multiplies raw values instead of deviations from the mean",
        expected_killers: &["CMR-1", "CMR-4"],
    },
    Entry {
        fault: CorrMeanSkipsDivide,
        idstr: "corr-mean-skips-divide",
        site: "correlation.pearson",
        class: ArithmeticOperator,
        description: "column mean computed as a plain sum (missing /n)",
        expected_killers: &["CMR-6"],
    },
    Entry {
        fault: CorrUndefinedAsNan,
        idstr: "corr-undefined-as-nan",
        site: "correlation.pearson",
        class: StatementSkip,
        description: "zero-variance input silently yields NaN instead of the undefined variant",
        expected_killers: &["CMR-8"],
    },
    Entry {
        fault: CorrClampSkipped,
        idstr: "corr-clamp-skipped",
        site: "correlation.pearson",
        class: StatementSkip,
        description: "final clamp of r into [-1, 1] skipped",
        expected_killers: &[],
    },
    Entry {
        fault: CorrScreenSkipped,
        idstr: "corr-screen-skipped",
        site: "correlation.pearson",
        class: StatementSkip,
        description: "screened policy skips outlier removal",
        expected_killers: &["CMR-9"],
    },
    Entry {
        fault: CorrMissingAsZero,
        idstr: "corr-missing-as-zero",
        site: "correlation.drop_missing_pairs",
        class: ConstantReplacement,
        description: "missing cells read as 0.0 instead of being dropped pairwise",
        expected_killers: &["CMR-10"],
    },
    Entry {
        fault: CorrMissingChecksXOnly,
        idstr: "corr-missing-checks-x-only",
        site: "correlation.drop_missing_pairs",
        class: StatementSkip,
        description: "pairwise deletion inspects only the x side of each pair",
        expected_killers: &["CMR-10"],
    },
    Entry {
        fault: RankBySignedR,
        idstr: "rank-by-signed-r",
        site: "correlation.rank_features",
        class: ComparisonOperator,
        description: "ranking orders by signed r instead of |r|",
        expected_killers: &["CMR-5"],
    },
    Entry {
        fault: RankAscending,
        idstr: "rank-ascending",
        site: "correlation.rank_features",
        class: ComparisonOperator,
        description: "ranking sorted ascending instead of descending",
        expected_killers: &["CMR-4"],
    },
    Entry {
        fault: NormFitOnValidation,
        idstr: "norm-fit-on-validation",
        site: "forecaster.evaluate",
        class: DataLeakage,
        description: "evaluation refits min/max on the validation data",
        expected_killers: &["FMR-2"],
    },
    Entry {
        fault: WindowCountOffByOne,
        idstr: "window-count-off-by-one",
        site: "series.make_sequences",
        class: BoundaryShift,
        description: "sequence generation drops the final window",
        expected_killers: &["FMR-3", "FMR-4"],
    },
    Entry {
        fault: WindowStrideTwo,
        idstr: "window-stride-two",
        site: "series.make_sequences",
        class: BoundaryShift,
        description: "windows advance by 2 instead of 1",
        expected_killers: &["FMR-3", "FMR-4"],
    },
    Entry {
        fault: WindowTargetOverlap,
        idstr: "window-target-overlap",
        site: "series.make_sequences",
        class: BoundaryShift,
        description: "target starts on the window's last step instead of after it",
        expected_killers: &["FMR-3"],
    },
    Entry {
        fault: DenormDropsMin,
        idstr: "denorm-drops-min",
        site: "series.normalizer.denormalize",
        class: StatementSkip,
        description: "rescaling to original units omits adding the training minimum",
        expected_killers: &["FMR-1"],
    },
    Entry {
        fault: DenormUsesMax,
        idstr: "denorm-uses-max",
        site: "series.normalizer.denormalize",
        class: ConstantReplacement,
        description: "rescaling adds the training maximum instead of the minimum",
        expected_killers: &["FMR-1"],
    },
    Entry {
        fault: NormDividesByMin,
        idstr: "norm-divides-by-min",
        site: "series.normalizer.normalize",
        class: ArithmeticOperator,
        description: "normalization divides by min instead of by the range",
        expected_killers: &["FMR-1"],
    },
    Entry {
        fault: LoaderSkipsSort,
        idstr: "loader-skips-sort",
        site: "loader.table_from_rows",
        class: StatementSkip,
        description: "loader keeps csv rows in file order instead of sorting by timestamp",
        expected_killers: &["FMR-5"],
    },
    Entry {
        fault: RangeGuardUsesMax,
        idstr: "range-guard-uses-max",
        site: "series.normalizer.fit",
        class: ComparisonOperator,
        description: "zero-range guard tests max == 0 instead of max == min",
        expected_killers: &["FMR-6"],
    },
    Entry {
        fault: TrainShuffleDisabled,
        idstr: "train-shuffle-disabled",
        site: "forecaster.train",
        class: StatementSkip,
        description: "per-epoch shuffling of training windows skipped",
        expected_killers: &["FMR-1"],
    },
    Entry {
        fault: GradClipDisabled,
        idstr: "grad-clip-disabled",
        site: "forecaster.train",
        class: StatementSkip,
        description: "gradient-norm clipping skipped",
        expected_killers: &[],
    },
    Entry {
        fault: ForgetBiasZero,
        idstr: "forget-bias-zero",
        site: "lstm.init",
        class: ConstantReplacement,
        description: "forget-gate bias initialized to 0 instead of 1",
        expected_killers: &[],
    },
    Entry {
        fault: TrainLossSumNotMean,
        idstr: "train-loss-sum-not-mean",
        site: "forecaster.train",
        class: ConstantReplacement,
        description: "per-window loss summed over the horizon instead of averaged",
        expected_killers: &["FMR-1"],
    },
    Entry {
        fault: EvalSkipsFirstWindow,
        idstr: "eval-skips-first-window",
        site: "forecaster.evaluate",
        class: BoundaryShift,
        description: "evaluation drops the first validation window",
        expected_killers: &["FMR-4"],
    },
    Entry {
        fault: EvalClipsNormalized,
        idstr: "eval-clips-normalized",
        site: "forecaster.evaluate",
        class: StatementSkip,
        description: "evaluation clamps normalized validation inputs into [0, 1]",
        expected_killers: &[],
    },
    Entry {
        fault: EvalLossDenormalized,
        idstr: "eval-loss-denormalized",
        site: "forecaster.evaluate",
        class: StatementSkip,
        description: "validation loss computed in original units instead of normalized space",
        expected_killers: &["FMR-1"],
    },
    Entry {
        fault: BaselineSdPopulation,
        idstr: "baseline-sd-population",
        site: "baseline.summarize",
        class: ConstantReplacement,
        description: "standard deviation divides by n instead of n-1",
        expected_killers: &["VB-1"],
    },
];

/// Full fault catalog in declaration order.
pub fn catalog() -> Vec<FaultSpec> {
    ALL.iter()
        .map(|e| FaultSpec {
            id: e.fault,
            site: e.site,
            class: e.class,
            description: e.description,
            expected_killers: e.expected_killers,
        })
        .collect()
}

pub fn list_faults() -> Vec<FaultSpec> {
    catalog()
}

// 0 = no fault, otherwise FaultId as u8 + 1.
static ACTIVE: AtomicU8 = AtomicU8::new(0);
static GATE: OnceLock<Mutex<()>> = OnceLock::new();

/// True while `fault` is the active fault. Pipeline hooks call this.
#[inline]
pub fn on(fault: FaultId) -> bool {
    ACTIVE.load(Ordering::Relaxed) == fault as u8 + 1
}

/// Currently active fault, if any.
pub fn active() -> Option<FaultId> {
    match ACTIVE.load(Ordering::Relaxed) {
        0 => None,
        n => FaultId::all().into_iter().nth(n as usize - 1),
    }
}

/// Keeps a fault active until dropped.
pub struct FaultGuard {
    _gate: MutexGuard<'static, ()>,
}

impl Drop for FaultGuard {
    fn drop(&mut self) {
        ACTIVE.store(0, Ordering::SeqCst);
    }
}

/// Activates one fault for the lifetime of the returned guard. Blocks until
/// any previously active fault is released.
pub fn activate(fault: FaultId) -> FaultGuard {
    let gate = GATE
        .get_or_init(|| Mutex::new(()))
        .lock()
        .unwrap_or_else(|poisoned| poisoned.into_inner());
    ACTIVE.store(fault as u8 + 1, Ordering::SeqCst);
    FaultGuard { _gate: gate }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_has_at_least_twenty_faults() {
        assert!(catalog().len() >= 20, "catalog size {}", catalog().len());
    }

    #[test]
    fn ids_are_unique_and_round_trip() {
        let specs = catalog();
        for (i, spec) in specs.iter().enumerate() {
            assert_eq!(FaultId::parse(spec.id.id()), Some(spec.id));
            assert_eq!(spec.id as usize, i, "entry order must match enum order");
        }
        let mut ids: Vec<_> = specs.iter().map(|s| s.id.id()).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), specs.len());
    }

    #[test]
    fn mandatory_faults_are_catalogued() {
        for id in [
            "norm-fit-on-validation",
            "window-count-off-by-one",
            "denorm-drops-min",
            "corr-missing-sqrt",
            "loader-skips-sort",
            "baseline-sd-population",
        ] {
            assert!(FaultId::parse(id).is_some(), "missing mandatory fault {id}");
        }
    }

    #[test]
    fn guard_scopes_the_active_fault() {
        assert_eq!(active(), None);
        {
            let _g = activate(FaultId::CorrMissingSqrt);
            assert!(on(FaultId::CorrMissingSqrt));
            assert!(!on(FaultId::RankAscending));
        }
        assert_eq!(active(), None);
    }
}
