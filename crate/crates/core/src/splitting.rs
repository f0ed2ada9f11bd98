//! Depth-splitting sequences over the three sub-operators.

/// The three split sub-problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    /// Energy loss, straggling, removal and scatter source.
    Energy,
    /// Lateral advection.
    Lateral,
    /// Angular diffusion.
    Angular,
}

/// Where in the depth step a stage samples the scatter source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceAt {
    Start,
    End,
    /// Mean of the start and end sources.
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitOrder {
    /// Energy, lateral, angular, each over the full step.
    FirstOrder,
    /// Half energy, half lateral, full angular, half lateral, half energy.
    #[default]
    Strang,
    /// Palindrome with the energy stage in the middle.
    StrangEnergyInner,
}

/// One entry of a splitting sequence: stage, fraction of the depth step and
/// source sampling point (only meaningful for the energy stage).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubStep {
    pub stage: Stage,
    pub fraction: f64,
    pub source: SourceAt,
}

const fn sub(stage: Stage, fraction: f64, source: SourceAt) -> SubStep {
    SubStep { stage, fraction, source }
}

impl SplitOrder {
    pub fn sequence(self) -> Vec<SubStep> {
        use SourceAt::*;
        use Stage::*;
        match self {
            SplitOrder::FirstOrder => vec![sub(Energy, 1.0, Start), sub(Lateral, 1.0, Start), sub(Angular, 1.0, Start)],
            SplitOrder::Strang => vec![
                sub(Energy, 0.5, Start),
                sub(Lateral, 0.5, Start),
                sub(Angular, 1.0, Start),
                sub(Lateral, 0.5, Start),
                sub(Energy, 0.5, End),
            ],
            SplitOrder::StrangEnergyInner => vec![
                sub(Lateral, 0.5, Start),
                sub(Angular, 0.5, Start),
                sub(Energy, 1.0, Mean),
                sub(Angular, 0.5, Start),
                sub(Lateral, 0.5, Start),
            ],
        }
    }

    /// Distinct (stage, fraction) pairs, for pre-building step-size dependent operators.
    pub fn fractions(self, stage: Stage) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for s in self.sequence() {
            if s.stage == stage && !out.contains(&s.fraction) {
                out.push(s.fraction);
            }
        }
        out
    }
}

/// Advances `state` by one depth step `h`, calling `advance(stage, sub_h, source, state)`
/// for each sub-step of the sequence.
pub fn split_step<S>(order: SplitOrder, state: &mut S, h: f64, mut advance: impl FnMut(Stage, f64, SourceAt, &mut S)) {
    for s in order.sequence() {
        advance(s.stage, s.fraction * h, s.source, state);
    }
}
