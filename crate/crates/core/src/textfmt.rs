//! Versioned text encodings of networks and synthetic-data configs on top of
//! [`KvDoc`]. Floats use the shortest round-trip representation.

use std::path::Path;

use crate::config::{join_list, KvDoc, KvReader};
use crate::data::{Family, RadiusFn, SynthConfig};
use crate::error::{Error, Result};
use crate::nn::{Dense, NetParams, NetSpec, OutputKind};

pub const FORMAT_KEY: &str = "format";

pub fn output_kind_to_str(kind: OutputKind) -> String {
    match kind {
        OutputKind::Logits(c) => format!("logits:{c}"),
        OutputKind::NonnegScalar => "nonneg_scalar".into(),
        OutputKind::Linear(k) => format!("linear:{k}"),
    }
}

pub fn output_kind_from_str(s: &str) -> Result<OutputKind> {
    let bad = || Error::Config(format!("unknown output kind `{s}`"));
    if s == "nonneg_scalar" {
        return Ok(OutputKind::NonnegScalar);
    }
    let (kind, n) = s.split_once(':').ok_or_else(bad)?;
    let n: usize = n.parse().map_err(|_| bad())?;
    match kind {
        "logits" => Ok(OutputKind::Logits(n)),
        "linear" => Ok(OutputKind::Linear(n)),
        _ => Err(bad()),
    }
}

pub fn write_net(doc: &mut KvDoc, prefix: &str, params: &NetParams) {
    let spec = params.spec();
    doc.set(&format!("{prefix}.input"), spec.input_dim());
    doc.set(&format!("{prefix}.hidden"), join_list(spec.hidden_widths()));
    doc.set(&format!("{prefix}.output"), output_kind_to_str(spec.output()));
    for (k, l) in params.layers.iter().enumerate() {
        doc.set(&format!("{prefix}.layer{k}.w"), join_list(&l.weights));
        doc.set(&format!("{prefix}.layer{k}.b"), join_list(&l.bias));
    }
}

pub fn read_net(r: &mut KvReader<'_>, prefix: &str) -> Result<NetParams> {
    let spec = NetSpec::new(
        r.get(&format!("{prefix}.input"))?,
        r.list(&format!("{prefix}.hidden"))?,
        output_kind_from_str(r.str(&format!("{prefix}.output"))?)?,
    )?;
    let layers = spec
        .layer_shapes()
        .into_iter()
        .enumerate()
        .map(|(k, (inputs, outputs))| {
            Ok(Dense {
                inputs,
                outputs,
                weights: r.list(&format!("{prefix}.layer{k}.w"))?,
                bias: r.list(&format!("{prefix}.layer{k}.b"))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    NetParams::from_layers(spec, layers)
}

pub fn write_synth(doc: &mut KvDoc, prefix: &str, cfg: &SynthConfig) {
    match cfg.family {
        Family::Blobs {
            classes,
            separation,
            noise_std,
        } => {
            doc.set(&format!("{prefix}.family"), "blobs");
            doc.set(&format!("{prefix}.classes"), classes);
            doc.set(&format!("{prefix}.separation"), separation);
            doc.set(&format!("{prefix}.noise_std"), noise_std);
        }
        Family::Ring {
            radius,
            noise_std,
            label_lo,
            label_hi,
        } => {
            doc.set(&format!("{prefix}.family"), "ring");
            doc.set(&format!("{prefix}.radius_base"), radius.base);
            doc.set(&format!("{prefix}.radius_slope"), radius.slope);
            doc.set(&format!("{prefix}.noise_std"), noise_std);
            doc.set(&format!("{prefix}.label_lo"), label_lo);
            doc.set(&format!("{prefix}.label_hi"), label_hi);
        }
    }
    doc.set(&format!("{prefix}.dim"), cfg.dim);
    doc.set(&format!("{prefix}.n"), cfg.n);
    doc.set(&format!("{prefix}.seed"), cfg.seed);
}

/// Reads a synthetic-data config; `n` and `seed` fall back to the given
/// defaults when absent.
pub fn read_synth(r: &mut KvReader<'_>, prefix: &str, default_n: usize, default_seed: u64) -> Result<SynthConfig> {
    let key = |k: &str| format!("{prefix}.{k}");
    let family = match r.str(&key("family"))? {
        "blobs" => Family::Blobs {
            classes: r.get(&key("classes"))?,
            separation: r.get(&key("separation"))?,
            noise_std: r.get(&key("noise_std"))?,
        },
        "ring" => Family::Ring {
            radius: RadiusFn {
                base: r.get_or(&key("radius_base"), 1.0)?,
                slope: r.get_or(&key("radius_slope"), 1.0)?,
            },
            noise_std: r.get(&key("noise_std"))?,
            label_lo: r.get_or(&key("label_lo"), 0.0)?,
            label_hi: r.get_or(&key("label_hi"), 1.0)?,
        },
        other => return Err(Error::Config(format!("unknown data family `{other}`"))),
    };
    let cfg = SynthConfig {
        family,
        dim: r.get_or(&key("dim"), 2)?,
        n: r.get_or(&key("n"), default_n)?,
        seed: r.get_or(&key("seed"), default_seed)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Writes a document whose first key names its format and version.
pub fn save_doc(path: &Path, format: &str, doc: &KvDoc) -> Result<()> {
    let mut full = KvDoc::new();
    full.set(FORMAT_KEY, format);
    let mut text = full.to_text();
    text.push_str(&doc.to_text());
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn check_format(r: &mut KvReader<'_>, expected: &str) -> Result<()> {
    let found = r.str(FORMAT_KEY)?;
    if found != expected {
        return Err(Error::Config(format!("expected format `{expected}`, found `{found}`")));
    }
    Ok(())
}

pub const NET_FORMAT: &str = "cgankd-net v1";

pub fn net_to_text(params: &NetParams) -> String {
    let mut doc = KvDoc::new();
    doc.set(FORMAT_KEY, NET_FORMAT);
    write_net(&mut doc, "net", params);
    doc.to_text()
}

pub fn net_from_text(text: &str) -> Result<NetParams> {
    let doc = KvDoc::parse(text, "net")?;
    let mut r = doc.reader();
    check_format(&mut r, NET_FORMAT)?;
    let net = read_net(&mut r, "net")?;
    r.finish()?;
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init_params;

    #[test]
    fn net_text_round_trip_is_exact() {
        let spec = NetSpec::new(3, vec![5, 2], OutputKind::Logits(4)).unwrap();
        let p = init_params(&spec, 12);
        assert_eq!(net_from_text(&net_to_text(&p)).unwrap(), p);
    }

    #[test]
    fn wrong_format_is_rejected() {
        let spec = NetSpec::new(1, vec![1], OutputKind::NonnegScalar).unwrap();
        let text = net_to_text(&init_params(&spec, 0)).replace("cgankd-net v1", "cgankd-net v9");
        assert!(net_from_text(&text).is_err());
    }

    #[test]
    fn short_weight_list_is_rejected() {
        let spec = NetSpec::new(2, vec![2], OutputKind::NonnegScalar).unwrap();
        let mut doc = KvDoc::parse(&net_to_text(&init_params(&spec, 0)), "t").unwrap();
        doc.set("net.layer0.w", "0.5");
        assert!(net_from_text(&doc.to_text()).is_err());
    }
}
