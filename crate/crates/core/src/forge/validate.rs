//! Quality gates for generated tasks and the training-segment exporter.

use serde::{Deserialize, Serialize};

use crate::episode::{run_episode, EpisodeConfig, EpisodeOutcome, Limits};
use crate::protocol::{self, AgentTurn};
use crate::score::{self, Judge, ScoreRecord};

use super::{derive_question_type, TaskSpec};

/// Per-gate verdicts for one task.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub profile_gate: bool,
    pub replay_gate: bool,
    pub judge_gate: Option<bool>,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub problems: Vec<String>,
}

/// Run the oracle agent against the scripted customer on the task's world.
pub fn run_scripted(task: &TaskSpec) -> Result<EpisodeOutcome, crate::world::WorldError> {
    Ok(run_episode(
        EpisodeConfig {
            world: task.initial_state()?,
            assets: task.marker_assets(),
            preattached: task.upfront_assets(),
            limits: Limits::default(),
            multimodal: true,
        },
        &mut task.oracle_policy(),
        Box::new(task.scripted_user()),
    ))
}

/// Score an outcome against the task's key answers and ground truth.
pub fn score_outcome(task: &TaskSpec, outcome: &EpisodeOutcome, judge: &dyn Judge) -> ScoreRecord {
    ScoreRecord::build(
        &task.task_id,
        task.family,
        &outcome.transcript,
        &outcome.final_snapshot,
        &task.ground_truth_snapshot(),
        &task.key_answers,
        outcome.tool_call_count,
        outcome.termination,
        judge,
    )
}

/// The three-stage gate: profile/question-type consistency, a scripted
/// replay that must reach both perfect scores, and an optional external
/// judge review. Tasks failing a mandatory gate are rejected.
pub fn validate_task(task: &TaskSpec, judge_hook: Option<&dyn Judge>) -> ValidationReport {
    let mut problems = Vec::new();

    let profile_gate = match derive_question_type(&task.profile, &task.initial_world) {
        Ok(theta) if theta == task.question_type => true,
        Ok(_) => {
            problems.push("question type does not match the profile derivation".into());
            false
        }
        Err(e) => {
            problems.push(format!("profile inconsistent: {e}"));
            false
        }
    };

    let fallback = score::FallbackJudge::for_world(&task.initial_world);
    let replay_gate = match run_scripted(task) {
        Ok(outcome) => {
            let mut ok = true;
            if outcome.termination != task.expected_termination {
                problems.push(format!(
                    "scripted replay terminated {:?}, expected {:?}",
                    outcome.termination, task.expected_termination
                ));
                ok = false;
            }
            let record = score_outcome(task, &outcome, &fallback);
            if !record.ka {
                problems.push(format!(
                    "key answers missing in replay: {:?}",
                    record.missing_keys
                ));
                ok = false;
            }
            if !record.db {
                problems.push(format!("database mismatch in replay: {:?}", record.diffs));
                ok = false;
            }
            ok
        }
        Err(e) => {
            problems.push(format!("task world invalid: {e}"));
            false
        }
    };

    let judge_gate = judge_hook.map(|judge| match run_scripted(task) {
        Ok(outcome) => {
            let record = score_outcome(task, &outcome, judge);
            record.ka && record.db
        }
        Err(_) => false,
    });

    let pass = profile_gate && replay_gate && judge_gate.unwrap_or(true);
    ValidationReport {
        profile_gate,
        replay_gate,
        judge_gate,
        pass,
        problems,
    }
}

// ---------------------------------------------------------------------------
// Training-segment export
// ---------------------------------------------------------------------------

/// One supervised fine-tuning record: the rendered history as instruction,
/// the next (thought, action) as output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftSegment {
    pub instruction: String,
    pub output: String,
}

/// Split each trajectory of `t` steps into `t` segments. Segment `i`'s
/// instruction renders the question plus steps `0..i`; consecutive
/// instructions are strict prefix extensions of each other.
pub fn export_training_segments(outcomes: &[&EpisodeOutcome]) -> Vec<SftSegment> {
    let mut segments = Vec::new();
    for outcome in outcomes {
        let question = outcome
            .transcript
            .entries
            .first()
            .map(|e| e.text.as_str())
            .unwrap_or_default();
        let mut instruction = format!("{}\n", protocol::wrap_question(question));
        for step in &outcome.trajectory.steps {
            let turn = AgentTurn::call(&step.thought, step.call.clone());
            let output = protocol::render_turn(&turn);
            segments.push(SftSegment {
                instruction: instruction.clone(),
                output: output.clone(),
            });
            instruction.push_str(&output);
            instruction.push('\n');
            instruction.push_str(&protocol::wrap_observation(&step.observation));
            instruction.push('\n');
        }
    }
    segments
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forge::{generate_tasks, GenConfig};

    fn one_task(seed: u64) -> TaskSpec {
        generate_tasks(&GenConfig::new(seed, 1, None)).remove(0)
    }

    #[test]
    fn oracle_derived_tasks_pass_all_gates() {
        let task = one_task(61);
        let report = validate_task(&task, None);
        assert!(report.pass, "{:?}", report.problems);
        assert!(report.profile_gate && report.replay_gate);
        assert_eq!(report.judge_gate, None);
    }

    #[test]
    fn bogus_key_answer_fails_the_replay_gate() {
        let mut task = one_task(62);
        task.key_answers
            .push("the total comes to 123456.78 RMB".to_string());
        let report = validate_task(&task, None);
        assert!(!report.pass);
        assert!(!report.replay_gate);
        assert!(report
            .problems
            .iter()
            .any(|p| p.contains("key answers missing")));
    }

    #[test]
    fn dropping_a_required_write_fails_the_database_gate() {
        // Find a task whose chain writes, then drop one write call.
        for seed in 63..95 {
            let mut task = one_task(seed);
            let Some(pos) = task
                .action_chain
                .iter()
                .position(|s| s.call.tool.starts_with("modify_") || s.call.tool == "remark")
            else {
                continue;
            };
            task.action_chain.remove(pos);
            let report = validate_task(&task, None);
            assert!(!report.pass);
            assert!(report
                .problems
                .iter()
                .any(|p| p.contains("database mismatch")));
            return;
        }
        panic!("no writing task found in the seed range");
    }

    #[test]
    fn tampered_question_type_fails_the_profile_gate() {
        let mut task = one_task(64);
        task.question_type.family = match task.question_type.family {
            crate::rules::TaskFamily::Logistics => crate::rules::TaskFamily::PreSales,
            _ => crate::rules::TaskFamily::Logistics,
        };
        let report = validate_task(&task, None);
        assert!(!report.profile_gate);
        assert!(!report.pass);
    }

    #[test]
    fn judge_hook_gate_is_reported() {
        let task = one_task(65);
        let judge = crate::score::FallbackJudge::for_world(&task.initial_world);
        let report = validate_task(&task, Some(&judge));
        assert_eq!(report.judge_gate, Some(true));
        assert!(report.pass);
    }

    #[test]
    fn segments_split_one_per_step_with_prefix_property() {
        let task = one_task(66);
        let outcome = run_scripted(&task).unwrap();
        let steps = outcome.trajectory.steps.len();
        let segments = export_training_segments(&[&outcome]);
        assert_eq!(segments.len(), steps);
        for pair in segments.windows(2) {
            assert!(
                pair[1].instruction.starts_with(&pair[0].instruction),
                "instructions must extend by strict prefix"
            );
            assert!(pair[1].instruction.len() > pair[0].instruction.len());
        }
        for segment in &segments {
            assert!(segment.output.starts_with(crate::protocol::THOUGHT_OPEN));
        }
    }

    #[test]
    fn empty_trajectory_exports_nothing() {
        let task = one_task(67);
        let mut outcome = run_scripted(&task).unwrap();
        outcome.trajectory.steps.clear();
        assert!(export_training_segments(&[&outcome]).is_empty());
    }

    #[test]
    fn replay_gate_catches_a_stale_ground_truth() {
        let mut task = one_task(68);
        // Corrupt the ground truth with an extra remark.
        task.ground_truth_world
            .orders
            .values_mut()
            .next()
            .unwrap()
            .remarks
            .push("note that never happens".into());
        let report = validate_task(&task, None);
        assert!(!report.replay_gate, "{:?}", report.problems);
    }
}
