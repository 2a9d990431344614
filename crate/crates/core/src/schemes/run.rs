use super::{Nudging, Problem, SchemeConfig, SchemeError, State, Stepper};
use crate::cda::{estimate_ci, mu_guard};
use crate::fem::Field;

#[derive(Debug)]
pub struct RunOutput {
    pub state: State,
    pub steps: usize,
    /// Parameter-guard warnings raised before stepping.
    pub warnings: Vec<String>,
}

/// Steps from `u⁰` to `end_time`, calling `observer` on the initial state and after every step.
///
/// The observer may abort the run by returning an error message.
pub fn run(
    cfg: &SchemeConfig,
    problem: Problem,
    nudge: Option<&Nudging>,
    u0: Field,
    observer: &mut dyn FnMut(&State) -> Result<(), String>,
) -> Result<RunOutput, SchemeError> {
    let steps = cfg.num_steps()?;
    let mut warnings = Vec::new();
    if let Some(n) = nudge.filter(|n| n.mu > 0.0) {
        let ci = estimate_ci(&problem.space, &n.interpolant).ci();
        if let Some(w) = mu_guard(n.mu, n.interpolant.coarse.spacing, cfg.nu, ci) {
            log::warn!("{w}");
            warnings.push(w);
        }
    }
    let mut stepper = Stepper::new(*cfg, problem, nudge)?;
    let mut state = State::initial(u0)?;
    observer(&state).map_err(|msg| SchemeError::Observer { step: 0, msg })?;
    for _ in 0..steps {
        state = stepper.step(&state)?;
        log::debug!("step {} t = {:.6}", state.step, state.time);
        observer(&state).map_err(|msg| SchemeError::Observer { step: state.step, msg })?;
    }
    Ok(RunOutput { state, steps, warnings })
}
