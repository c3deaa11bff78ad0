use super::{Measurement, Output, RngStream};
use crate::error::{Error, Result};
use crate::exact::ExtRational;
use crate::metrics::{Dataset, Domain, Measure, Metric};

/// Budget-tracked handle on a private dataset. Each `ask` is checked against
/// the remaining budget before any randomness is drawn; a rejected ask
/// changes nothing.
///
/// Asks take `&mut self`, so the borrow checker serializes them.
#[derive(Debug)]
pub struct Queryable {
    data: Dataset,
    domain: Domain,
    metric: Metric,
    measure: Measure,
    total: ExtRational,
    spent: ExtRational,
    stream: RngStream,
    answered: u64,
}

pub fn make_queryable(
    data: Dataset,
    domain: Domain,
    metric: Metric,
    measure: Measure,
    total: ExtRational,
    seed: u64,
) -> Result<Queryable> {
    metric.check_domain(&domain)?;
    domain.check(&data)?;
    Ok(Queryable {
        data,
        domain,
        metric,
        measure,
        total,
        spent: ExtRational::zero(),
        stream: RngStream::new(seed),
        answered: 0,
    })
}

impl Queryable {
    /// Runs `m` on the held data, charging `spend`. `at_distance` is the
    /// input-metric distance that neighbouring datasets may differ by; `m`
    /// must guarantee a loss of at most `spend` there.
    pub fn ask(&mut self, m: &Measurement, spend: &ExtRational, at_distance: &ExtRational) -> Result<Output> {
        if m.input_domain() != &self.domain {
            return Err(Error::DomainMismatch("measurement domain differs from the queryable".into()));
        }
        if m.input_metric() != &self.metric {
            return Err(Error::MetricMismatch(format!(
                "queryable holds {}, measurement expects {}",
                self.metric,
                m.input_metric()
            )));
        }
        if m.output_measure() != self.measure {
            return Err(Error::MeasureMismatch(format!(
                "queryable accounts in {}, measurement releases under {}",
                self.measure,
                m.output_measure()
            )));
        }
        let remaining = self.remaining();
        if spend > &remaining {
            return Err(Error::InsufficientBudget {
                requested: spend.to_string(),
                remaining: remaining.to_string(),
            });
        }
        let loss = m.privacy_function().eval(at_distance);
        if &loss > spend {
            return Err(Error::GuaranteeTooWeak {
                loss: loss.to_string(),
                spend: spend.to_string(),
            });
        }
        let out = m.invoke(&self.data, &self.stream.child(self.answered))?;
        self.spent = &self.spent + spend;
        self.answered += 1;
        Ok(out)
    }

    pub fn total(&self) -> &ExtRational {
        &self.total
    }

    pub fn spent(&self) -> &ExtRational {
        &self.spent
    }

    pub fn remaining(&self) -> ExtRational {
        self.total.checked_sub(&self.spent).unwrap_or_else(ExtRational::zero)
    }

    pub fn queries_answered(&self) -> u64 {
        self.answered
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }
}
