use super::{mean_by_source, BaselineError, Method, OutletEmbedding};
use crate::corpus::Instance;
use crate::scorer::{bounded_map, ModelId, Scorer, ScorerError};

/// Mean LM embedding per outlet. `LmC` embeds every instance with the topic's
/// source classifier; `LmM` embeds each outlet's instances with that outlet's
/// own fine-tuned masked LM. Failed calls are dropped unless they exceed 10%
/// of all calls.
pub fn lm_embed_outlets(
    instances: &[Instance],
    method: Method,
    scorer: &dyn Scorer,
    family: &str,
    max_in_flight: usize,
) -> Result<Vec<OutletEmbedding>, BaselineError> {
    let model_for = |inst: &Instance| match method {
        Method::LmC => Ok(ModelId::classifier(family, &inst.topic)),
        Method::LmM => Ok(ModelId::source(family, &inst.topic, &inst.source)),
        other => Err(BaselineError::Config(format!("{other} is not an LM method"))),
    };
    let models = instances.iter().map(model_for).collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<(&Instance, ModelId)> = instances.iter().zip(models).collect();
    let results: Vec<Result<Vec<f64>, ScorerError>> =
        bounded_map(&jobs, max_in_flight, |(inst, model)| scorer.embed(model, &inst.text));

    let total = results.len();
    let mut ok = Vec::with_capacity(total);
    let mut failed = Vec::new();
    for ((inst, _), r) in jobs.iter().zip(results) {
        match r {
            Ok(v) => ok.push((inst.source.as_str(), v)),
            Err(e) => {
                log::warn!("embedding {} failed: {e}", inst.id);
                failed.push(e);
            }
        }
    }
    if failed.len() * 10 > total {
        return Err(BaselineError::TooManyFailures {
            failed: failed.len(),
            total,
            first: failed.swap_remove(0),
        });
    }
    let out = mean_by_source(ok, method)?;
    for inst in instances {
        if !out.iter().any(|o| o.source == inst.source) {
            return Err(BaselineError::NoEmbeddings(inst.source.clone()));
        }
    }
    Ok(out)
}
