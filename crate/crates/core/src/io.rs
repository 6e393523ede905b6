//! Text formats for measures and sampler streams.
//!
//! Measures are `state value` lines, one per state with non-zero mass;
//! states are named as in the model. Sampler streams are blocks, each
//! preceded by a header line `# seed=<seed> replica=<i> caps=<g>/<p> flags=<flags>`.

use std::fmt::Write;

use crate::bmc::SamplerCaps;
use crate::error::{Error, Result};
use crate::model::{Measure, Model};

/// Parses `state value` lines. Blank lines and `#` comments are skipped;
/// a state listed twice accumulates.
pub fn parse_measure(text: &str, model: &Model) -> Result<Measure> {
    let mut v = vec![0.0; model.n_states()];
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            line: i + 1,
            message,
        };
        let [state, value] = line.split_whitespace().collect::<Vec<_>>()[..] else {
            return Err(parse_err("measure lines are `state value`".into()));
        };
        let x = model
            .state_index(state)
            .map_err(|_| parse_err(format!("unknown state `{state}`")))?;
        let val: f64 = value
            .parse()
            .map_err(|_| parse_err(format!("bad value `{value}`")))?;
        v[x] += val;
    }
    Measure::new(v)
}

pub fn format_measure(measure: &Measure, model: &Model) -> String {
    let mut s = String::new();
    for (x, &v) in measure.values().iter().enumerate() {
        if v != 0.0 {
            let _ = writeln!(s, "{} {}", model.names()[x], v);
        }
    }
    s
}

pub fn stream_header(
    seed: u64,
    replica: u64,
    caps: SamplerCaps,
    flags: impl std::fmt::Display,
) -> String {
    format!("# seed={seed} replica={replica} caps={caps} flags={flags}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference::model_a;

    #[test]
    fn measure_round_trip() {
        let m = model_a();
        let mu = Measure::new(vec![1.5, 0.0, 0.25]).unwrap();
        let text = format_measure(&mu, &m);
        assert_eq!(text, "0 1.5\n2 0.25\n");
        assert_eq!(parse_measure(&text, &m).unwrap(), mu);
        assert_eq!(parse_measure("# c\n\n1 2\n1 1", &m).unwrap().get(1), 3.0);
    }

    #[test]
    fn measure_errors_name_the_line() {
        let m = model_a();
        assert_eq!(
            parse_measure("0 1\n7 1", &m),
            Err(Error::Parse {
                line: 2,
                message: "unknown state `7`".into()
            })
        );
        assert!(matches!(
            parse_measure("0 x", &m),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_measure("0 1 2", &m),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(parse_measure("0 -1", &m).is_err());
    }
}
