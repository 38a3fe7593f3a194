use std::time::Instant;

use super::summary::{ObjectDescriptor, SceneSummary};
use super::{ReasonerMetrics, ReasoningError, ReceptacleDecision};
use crate::geometry::Vec3;
use crate::scene::{SimilarityHint, TaskDescription};

const CONTAINMENT_TOL: f64 = 1e-6;

/// Attribute key compared for each kind of similarity.
pub fn similarity_attribute(hint: SimilarityHint) -> &'static str {
    match hint {
        SimilarityHint::Color => "color",
        SimilarityHint::Shape => "shape",
        SimilarityHint::ObjectProperty | SimilarityHint::None => "category",
        SimilarityHint::Genre => "genre",
    }
}

/// Hint if given, else keywords in the task text, else object property.
pub fn resolve_similarity(task: &TaskDescription) -> SimilarityHint {
    if task.similarity_hint != SimilarityHint::None {
        return task.similarity_hint;
    }
    let text = task.text.to_lowercase();
    if text.contains("color") || text.contains("colour") {
        SimilarityHint::Color
    } else if text.contains("shape") {
        SimilarityHint::Shape
    } else if text.contains("categor") {
        SimilarityHint::ObjectProperty
    } else if text.contains("genre") {
        SimilarityHint::Genre
    } else {
        SimilarityHint::ObjectProperty
    }
}

fn bottom_center(o: &ObjectDescriptor) -> Vec3 {
    Vec3::new(o.center[0], o.center[1], o.center[2] - 0.5 * o.size[2])
}

fn normalized(v: &str) -> String {
    v.trim().to_lowercase()
}

/// Deterministic matcher: a receptacle matches when it, or an object standing
/// in it, shares the placement object's similarity attribute.
pub fn rule_reason(summary: &SceneSummary, task: &TaskDescription) -> Result<ReceptacleDecision, ReasoningError> {
    let start = Instant::now();
    if summary.receptacles.is_empty() {
        return Err(ReasoningError::NoReceptacles);
    }
    let hint = resolve_similarity(task);
    let key = similarity_attribute(hint);
    let wanted = summary.placement.attributes.get(key).map(|v| normalized(v));
    let contents: Vec<&ObjectDescriptor> =
        summary.objects.iter().filter(|o| !summary.receptacles.contains(&o.id)).collect();
    let mut matched = Vec::new();
    let mut reasons = Vec::new();
    if let Some(wanted) = &wanted {
        for rid in &summary.receptacles {
            let r = summary.object(rid).ok_or_else(|| ReasoningError::Contract(format!("unknown receptacle {rid}")))?;
            let own = r.attributes.get(key).is_some_and(|v| normalized(v) == *wanted);
            let bound = r.aabb();
            let held = contents.iter().find(|o| {
                bound.contains(&bottom_center(o), CONTAINMENT_TOL) && o.attributes.get(key).is_some_and(|v| normalized(v) == *wanted)
            });
            if own || held.is_some() {
                matched.push(rid.clone());
                reasons.push(match held {
                    Some(o) => format!("{rid} holds {} with {key} {wanted}", o.id),
                    None => format!("{rid} has {key} {wanted}"),
                });
            }
        }
    }
    let (receptacle_ids, rationale) = if matched.is_empty() {
        (summary.receptacles.clone(), "no attribute match".to_string())
    } else {
        (matched, reasons.join("; "))
    };
    Ok(ReceptacleDecision {
        receptacle_ids,
        rationale,
        reasoner: "rule".into(),
        metrics: ReasonerMetrics { wall_time: start.elapsed().as_secs_f64(), prompt_tokens: 0, completion_tokens: 0 },
    })
}
