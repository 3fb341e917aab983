//! Named-construction grammar for measurement inputs:
//! `mub:<d>`, `theta:<radians>`, `qMUB:<d>`, `dev:3`, `primemubs:<d>:<k>`,
//! `file:<path>`.

use incompat::povm::{self, MeasurementSet};

pub fn parse_measurement_set(spec: &str) -> Result<MeasurementSet, String> {
    let mut parts = spec.splitn(3, ':');
    let head = parts.next().unwrap_or_default();
    match head {
        "mub" => {
            let d = parse_num::<usize>(parts.next(), "mub:<d>")?;
            povm::mub_pair(d).map_err(|e| e.to_string())
        }
        "theta" => {
            let theta = parse_num::<f64>(parts.next(), "theta:<radians>")?;
            povm::qubit_theta_pair(theta).map_err(|e| e.to_string())
        }
        "qMUB" | "qmub" => {
            let d = parse_num::<usize>(parts.next(), "qMUB:<d>")?;
            povm::qmub_pair(d).map_err(|e| e.to_string())
        }
        "dev" => {
            let d = parse_num::<usize>(parts.next(), "dev:3")?;
            if d != 3 {
                return Err("the deviated pair exists in dimension 3 only".into());
            }
            Ok(povm::dev3_pair())
        }
        "primemubs" => {
            let d = parse_num::<usize>(parts.next(), "primemubs:<d>:<k>")?;
            let k = parse_num::<usize>(parts.next(), "primemubs:<d>:<k>")?;
            povm::prime_mub_set(d, k).map_err(|e| e.to_string())
        }
        "file" => {
            let path = parts.next().ok_or("file:<path> expects a path")?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {path}: {e}"))?;
            MeasurementSet::from_json(&text).map_err(|e| e.to_string())
        }
        other => Err(format!(
            "unknown construction `{other}` (expected mub:, theta:, qMUB:, dev:, primemubs:, file:)"
        )),
    }
}

fn parse_num<T: std::str::FromStr>(part: Option<&str>, usage: &str) -> Result<T, String> {
    part.ok_or_else(|| format!("missing argument, usage {usage}"))?
        .parse::<T>()
        .map_err(|_| format!("invalid number, usage {usage}"))
}
