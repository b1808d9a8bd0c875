//! Reference policies: the exhaustive oracle (two independent
//! implementations), and the random and rule-based baselines.

use rand::Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::reward::{routing_reward, RewardModel, RewardParams};
use super::state::{DegradationState, RoutingAction};
use crate::agents::{ModalityCombo, PerfTable};
use crate::error::Result;
use crate::seed::SimRng;

/// Anything that maps a degradation state to a combo pair. `rng` is only
/// consumed by stochastic policies.
pub trait RoutingPolicy: Sync {
    fn name(&self) -> &str;
    fn act(&self, state: DegradationState, rng: &mut SimRng) -> RoutingAction;
}

/// State-indexed lookup table of actions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TabularPolicy {
    pub name: String,
    pub actions: Vec<RoutingAction>,
}

impl TabularPolicy {
    pub fn get(&self, s: DegradationState) -> RoutingAction {
        self.actions[s.mask() as usize]
    }
}

impl RoutingPolicy for TabularPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn act(&self, state: DegradationState, _rng: &mut SimRng) -> RoutingAction {
        self.get(state)
    }
}

/// Exhaustive argmax over all 225 actions per state, scanning in flat-index
/// order and keeping the first maximum.
pub fn oracle_policy(table: &PerfTable, params: &RewardParams) -> Result<TabularPolicy> {
    let mut actions = Vec::with_capacity(DegradationState::COUNT);
    for s in DegradationState::all() {
        let mut best = RoutingAction::from_flat(0)?;
        let mut best_r = routing_reward(s, best, table, params)?;
        for a in RoutingAction::all().skip(1) {
            let r = routing_reward(s, a, table, params)?;
            if r > best_r {
                best = a;
                best_r = r;
            }
        }
        actions.push(best);
    }
    Ok(TabularPolicy {
        name: "Oracle".into(),
        actions,
    })
}

/// Second oracle. The reward is a sum of a beam-only and a block-only term,
/// so each head is maximized on its own; the lowest combo index wins ties,
/// which reproduces the beam-major tie-break of the joint scan.
pub fn oracle_policy_by_head(model: &RewardModel) -> TabularPolicy {
    let argmax = |f: &dyn Fn(ModalityCombo) -> f64| {
        let mut best = ModalityCombo::from_index(0).expect("index 0");
        for c in ModalityCombo::all().skip(1) {
            if f(c) > f(best) {
                best = c;
            }
        }
        best
    };
    let actions = DegradationState::all()
        .map(|s| {
            RoutingAction::new(
                argmax(&|c| model.beam_term(s, c).total),
                argmax(&|c| model.block_term(s, c).total),
            )
        })
        .collect();
    TabularPolicy {
        name: "Oracle".into(),
        actions,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Random,
    RuleBased,
}

/// Highest-metric combo among those with no degraded modality, else the
/// globally highest. Lowest index on ties.
fn best_clean(state: DegradationState, metric: impl Fn(ModalityCombo) -> f64) -> ModalityCombo {
    let pick = |clean_only: bool| {
        ModalityCombo::all()
            .filter(|c| !clean_only || c.overlap(state.mask()) == 0)
            .fold(None::<ModalityCombo>, |best, c| match best {
                Some(b) if metric(b) >= metric(c) => Some(b),
                _ => Some(c),
            })
    };
    pick(true).or_else(|| pick(false)).expect("15 combos")
}

pub fn rule_based_action(state: DegradationState, table: &PerfTable) -> RoutingAction {
    RoutingAction::new(
        best_clean(state, |c| table.t1(c).beam_top3_acc),
        best_clean(state, |c| table.t1(c).block_f1),
    )
}

pub fn random_action<R: Rng>(rng: &mut R) -> RoutingAction {
    RoutingAction::from_flat(rng.random_range(0..RoutingAction::COUNT)).expect("in range")
}

pub fn baseline_policy(kind: BaselineKind, state: DegradationState, table: &PerfTable, seed: u64) -> RoutingAction {
    match kind {
        BaselineKind::Random => random_action(&mut SimRng::seed_from_u64(seed)),
        BaselineKind::RuleBased => rule_based_action(state, table),
    }
}

pub struct RuleBasedPolicy {
    table: TabularPolicy,
}

impl RuleBasedPolicy {
    pub fn new(table: &PerfTable) -> Self {
        Self {
            table: TabularPolicy {
                name: "Rule-Based Policy".into(),
                actions: DegradationState::all().map(|s| rule_based_action(s, table)).collect(),
            },
        }
    }
}

impl RoutingPolicy for RuleBasedPolicy {
    fn name(&self) -> &str {
        &self.table.name
    }

    fn act(&self, state: DegradationState, _rng: &mut SimRng) -> RoutingAction {
        self.table.get(state)
    }
}

pub struct RandomPolicy;

impl RoutingPolicy for RandomPolicy {
    fn name(&self) -> &str {
        "Random Policy"
    }

    fn act(&self, _state: DegradationState, rng: &mut SimRng) -> RoutingAction {
        random_action(rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::PerfRecord;
    use proptest::prelude::*;

    fn table() -> PerfTable {
        PerfTable::bundled().unwrap()
    }

    fn c(s: &str) -> ModalityCombo {
        s.parse().unwrap()
    }

    #[test]
    fn two_oracles_agree() {
        let t = table();
        for verbatim in [false, true] {
            let p = RewardParams {
                verbatim_sign: verbatim,
                ..RewardParams::default()
            };
            let a = oracle_policy(&t, &p).unwrap();
            let b = oracle_policy_by_head(&RewardModel::new(&t, &p).unwrap());
            assert_eq!(a, b);
        }
    }

    #[test]
    fn only_radar_clean_routes_to_radar() {
        let o = oracle_policy(&table(), &RewardParams::default()).unwrap();
        let a = o.get(DegradationState::from_mask(0b0111).unwrap());
        assert_eq!(a, RoutingAction::new(c("radar_only"), c("radar_only")));
    }

    #[test]
    fn zeroed_params_pick_first_action() {
        let t = table();
        let o = oracle_policy(&t, &RewardParams::zeroed()).unwrap();
        let h = oracle_policy_by_head(&RewardModel::new(&t, &RewardParams::zeroed()).unwrap());
        for s in DegradationState::all() {
            assert_eq!(o.get(s), RoutingAction::from_indices(0, 0).unwrap());
            assert_eq!(h.get(s), RoutingAction::from_indices(0, 0).unwrap());
        }
    }

    #[test]
    fn rule_based_examples() {
        let t = table();
        let clean = rule_based_action(DegradationState::CLEAN, &t);
        assert_eq!(clean.beam, c("camera_gps_lidar"));
        let cam = rule_based_action(DegradationState::from_mask(0b0001).unwrap(), &t);
        assert_eq!(cam.beam, c("gps_lidar_radar"));
        let all = rule_based_action(DegradationState::from_mask(0b1111).unwrap(), &t);
        assert_eq!(all, clean);
    }

    #[test]
    fn random_reproducible() {
        let t = table();
        let s = DegradationState::CLEAN;
        assert_eq!(
            baseline_policy(BaselineKind::Random, s, &t, 11),
            baseline_policy(BaselineKind::Random, s, &t, 11)
        );
    }

    proptest! {
        #[test]
        fn rule_based_avoids_degraded_when_possible(mask in 0u8..15) {
            let t = table();
            let s = DegradationState::from_mask(mask).unwrap();
            prop_assert!(!rule_based_action(s, &t).uses_degraded(s));
        }

        #[test]
        fn argmax_invariant_under_latency_scaling(k in 0.01f64..100.0) {
            let t = table();
            let scaled = t.map_records(|r| PerfRecord {
                preproc_ms: r.preproc_ms * k,
                beam_infer_ms: r.beam_infer_ms * k,
                block_infer_ms: r.block_infer_ms * k,
                ..*r
            });
            let p = RewardParams::default();
            let a = oracle_policy_by_head(&RewardModel::new(&t, &p).unwrap());
            let b = oracle_policy_by_head(&RewardModel::new(&scaled, &p).unwrap());
            prop_assert_eq!(a, b);
        }
    }
}
