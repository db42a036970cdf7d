//! Plain-text parameter checkpoints.
//!
//! ```text
//! qforecast-drnn 1
//! config {...json...}
//! tensor c0l0.w 32 10
//! <rows·cols space-separated values>
//! ...
//! ```

use std::io::{BufRead, BufReader, Read, Write};

use super::network::{Drnn, DrnnParams};
use super::DrnnConfig;
use crate::error::{invalid, Error, Result};

const MAGIC: &str = "qforecast-drnn";
const VERSION: u32 = 1;

pub fn save_checkpoint<W: Write>(net: &Drnn, params: &DrnnParams, mut out: W) -> Result<()> {
    net.check_params(params)?;
    writeln!(out, "{MAGIC} {VERSION}")?;
    writeln!(out, "config {}", serde_json::to_string(net.config())?)?;
    for t in &net.layout().tensors {
        writeln!(out, "tensor {} {} {}", t.name, t.rows, t.cols)?;
        let vals: Vec<String> = params.slice(t).iter().map(f64::to_string).collect();
        writeln!(out, "{}", vals.join(" "))?;
    }
    Ok(())
}

pub fn load_checkpoint<R: Read>(input: R) -> Result<(Drnn, DrnnParams)> {
    let mut lines = BufReader::new(input).lines();
    let mut next = |what: &str| -> Result<String> {
        lines
            .next()
            .transpose()?
            .ok_or_else(|| invalid("checkpoint", format!("truncated before {what}")))
    };
    let header = next("header")?;
    match header.split_once(' ') {
        Some((MAGIC, v)) if v.trim() == VERSION.to_string() => {}
        _ => return Err(invalid("checkpoint", format!("unrecognized header '{header}'"))),
    }
    let config_line = next("config")?;
    let json = config_line
        .strip_prefix("config ")
        .ok_or_else(|| invalid("checkpoint", "missing config line"))?;
    let config: DrnnConfig = serde_json::from_str(json)?;
    let net = Drnn::new(config)?;
    let mut params = net.zero_params();
    for t in net.layout().tensors.clone() {
        let head = next("tensor header")?;
        let parts: Vec<&str> = head.split_whitespace().collect();
        let expected = ["tensor".to_string(), t.name.clone(), t.rows.to_string(), t.cols.to_string()];
        if parts != expected.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(Error::Shape(format!(
                "checkpoint tensor '{head}' does not match expected '{}'",
                expected.join(" ")
            )));
        }
        let body = next("tensor values")?;
        let vals: Vec<f64> = body
            .split_whitespace()
            .map(|s| s.parse::<f64>().map_err(|e| invalid("checkpoint", format!("{}: {e}", t.name))))
            .collect::<Result<_>>()?;
        if vals.len() != t.len() {
            return Err(Error::Shape(format!("tensor {} has {} values, expected {}", t.name, vals.len(), t.len())));
        }
        params.slice_mut(&t).copy_from_slice(&vals);
    }
    if !params.is_finite() {
        return Err(invalid("checkpoint", "non-finite parameter"));
    }
    Ok((net, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drnn::CellType;
    use crate::forecast::QuantileSet;

    #[test]
    fn round_trip_is_exact() {
        let net = Drnn::new(DrnnConfig {
            cell_type: CellType::ResLstm,
            dilations: vec![vec![1, 2], vec![4]],
            state_hsize: 5,
            add_nl_layer: true,
            input_size_multiplier: 4,
            output_size: 2,
            quantiles: QuantileSet::demand_default(),
            static_vocab: vec![2, 9],
            exog_width: 7,
        })
        .unwrap();
        let p = net.init_params(42);
        let mut buf = Vec::new();
        save_checkpoint(&net, &p, &mut buf).unwrap();
        let (net2, p2) = load_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(net2, net);
        assert_eq!(p2, p);
    }

    #[test]
    fn corrupt_checkpoints_are_rejected() {
        assert!(load_checkpoint("nonsense 1\n".as_bytes()).is_err());
        let net = Drnn::new(DrnnConfig {
            cell_type: CellType::Vanilla,
            dilations: vec![vec![1]],
            state_hsize: 2,
            add_nl_layer: false,
            input_size_multiplier: 1,
            output_size: 1,
            quantiles: QuantileSet::new(vec![0.5]).unwrap(),
            static_vocab: vec![],
            exog_width: 0,
        })
        .unwrap();
        let mut buf = Vec::new();
        save_checkpoint(&net, &net.zero_params(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let truncated: String = text.lines().take(4).map(|l| format!("{l}\n")).collect();
        assert!(load_checkpoint(truncated.as_bytes()).is_err());
        let reshaped = text.replacen("tensor c0l0.u 2 2", "tensor c0l0.u 2 3", 1);
        assert!(load_checkpoint(reshaped.as_bytes()).is_err());
    }
}
