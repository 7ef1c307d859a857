use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BackendError, BackendReply, PlanBackend};
use crate::domain::{ActionStep, Plan, SkillVerb};
use crate::protocol::{parse_robot_output, render_result, ParseOptions, PlannerResult, SessionRecord};

/// Wraps a backend and corrupts each plan reply with probability `p` by
/// appending a spurious `turn(left)`. Used to calibrate the metrics.
pub struct MutationBackend<B> {
    inner: B,
    probability: f64,
    rng: Mutex<ChaCha8Rng>,
}

impl<B: PlanBackend> MutationBackend<B> {
    pub fn new(inner: B, probability: f64, seed: u64) -> Self {
        Self {
            inner,
            probability: probability.clamp(0.0, 1.0),
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
        }
    }
}

impl<B: PlanBackend> PlanBackend for MutationBackend<B> {
    fn name(&self) -> &str {
        "mutate"
    }

    fn plan(&self, record: &SessionRecord) -> Result<BackendReply, BackendError> {
        let mut reply = self.inner.plan(record)?;
        if let Ok(PlannerResult::Plan(plan)) = parse_robot_output(&reply.text, &ParseOptions::strict()) {
            let corrupt = {
                let mut rng = self.rng.lock().unwrap_or_else(|p| p.into_inner());
                rng.random::<f64>() < self.probability
            };
            if corrupt {
                let mut steps = plan.into_steps();
                steps.push(ActionStep::new(SkillVerb::Turn, ["left"]));
                let wrong = Plan::new(steps).expect("non-empty");
                reply.text = render_result(&PlannerResult::Plan(wrong));
            }
        }
        Ok(reply)
    }
}
