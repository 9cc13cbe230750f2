//! Plain-text parameter checkpoints.
//!
//! ```text
//! cpinn-mlp v1 widths=2,30,30,1 activation=tanh scalar=f64 params=1021
//! 0.123
//! -0.0456
//! ...
//! ```
//!
//! One parameter per line in flattening order, printed with the shortest representation
//! that parses back to the identical value.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::{param_count, Activation, Mlp};
use crate::error::{Error, Result};
use crate::scalar::Real;

const MAGIC: &str = "cpinn-mlp v1";

pub fn to_string<T: Real>(net: &Mlp<T>) -> String {
    let widths: Vec<String> = net.widths().iter().map(ToString::to_string).collect();
    let mut out = format!(
        "{MAGIC} widths={} activation={} scalar={} params={}\n",
        widths.join(","),
        net.activation().name(),
        T::TAG,
        net.num_params()
    );
    for v in net.params() {
        writeln!(out, "{v:?}").expect("write to string");
    }
    out
}

pub fn from_str<T: Real + FromStr>(text: &str) -> Result<Mlp<T>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Checkpoint("empty file".into()))?;
    let rest = header
        .strip_prefix(MAGIC)
        .ok_or_else(|| Error::Checkpoint(format!("bad header `{header}`")))?;
    let mut widths = None;
    let mut activation = None;
    let mut count = None;
    for field in rest.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::Checkpoint(format!("bad header field `{field}`")))?;
        match key {
            "widths" => {
                let parsed: std::result::Result<Vec<usize>, _> =
                    value.split(',').map(str::parse).collect();
                widths = Some(parsed.map_err(|e| Error::Checkpoint(format!("widths: {e}")))?);
            }
            "activation" => {
                activation = Some(
                    Activation::parse(value)
                        .ok_or_else(|| Error::Checkpoint(format!("activation `{value}`")))?,
                );
            }
            "params" => {
                count = Some(
                    value
                        .parse::<usize>()
                        .map_err(|e| Error::Checkpoint(format!("params: {e}")))?,
                );
            }
            "scalar" => {}
            other => return Err(Error::Checkpoint(format!("unknown header key `{other}`"))),
        }
    }
    let widths = widths.ok_or_else(|| Error::Checkpoint("missing widths".into()))?;
    let activation = activation.ok_or_else(|| Error::Checkpoint("missing activation".into()))?;
    if let Some(n) = count {
        if n != param_count(&widths) {
            return Err(Error::Checkpoint(format!(
                "params={n} does not match widths ({})",
                param_count(&widths)
            )));
        }
    }
    let params: Vec<T> = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim()
                .parse::<T>()
                .map_err(|_| Error::Checkpoint(format!("bad value `{l}`")))
        })
        .collect::<Result<_>>()?;
    Mlp::from_params(&widths, activation, &params)
}

pub fn write<T: Real>(path: &Path, net: &Mlp<T>) -> Result<()> {
    std::fs::write(path, to_string(net)).map_err(|e| Error::io(path, e))
}

pub fn read<T: Real + FromStr>(path: &Path) -> Result<Mlp<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn text_round_trip_is_exact(seed in any::<u64>(), hidden in 1usize..6) {
            let net = Mlp::<f64>::xavier(&[2, hidden, hidden, 1], Activation::Tanh, seed).unwrap();
            let back: Mlp<f64> = from_str(&to_string(&net)).unwrap();
            prop_assert_eq!(back.params(), net.params());
            prop_assert_eq!(back.widths(), net.widths());

            let single: Mlp<f32> = net.cast();
            let back32: Mlp<f32> = from_str(&to_string(&single)).unwrap();
            prop_assert_eq!(back32.params(), single.params());
        }

        #[test]
        fn flatten_round_trip(seed in any::<u64>()) {
            let net = Mlp::<f64>::xavier(&[3, 4, 2, 1], Activation::Sigmoid, seed).unwrap();
            let mut other = Mlp::<f64>::zeros(&[3, 4, 2, 1], Activation::Sigmoid).unwrap();
            other.set_params(&net.params()).unwrap();
            prop_assert_eq!(other.params(), net.params());
        }
    }

    #[test]
    fn rejects_count_mismatch() {
        let text = "cpinn-mlp v1 widths=1,1 activation=tanh scalar=f64 params=3\n0\n0\n";
        assert!(from_str::<f64>(text).is_err());
        let text = "cpinn-mlp v1 widths=1,1 activation=tanh scalar=f64 params=2\n0\n";
        assert!(from_str::<f64>(text).is_err());
    }
}
