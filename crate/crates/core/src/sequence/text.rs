//! Line-oriented sequence format. One instruction per line, fields
//! separated by single spaces:
//!
//! ```text
//! sites 4
//! pulse 100 angle=1.5707963267948966 phase=0
//! shift 32 1:174.6 3:174.6
//! wait 34
//! flip 332 mode=composite pulse=100 shift_time=32 pad=34 move=349.2 sites=1,3
//! measure 0 0:Z 1:Z 2:Z 3:Z
//! ```
//!
//! The second field is always the duration in µs. Numbers are written in
//! shortest round-trip form, so `parse(to_text(s)) == s`. Blank lines and
//! lines starting with `#` are ignored.

use std::fmt::Write as _;

use super::{FlipMode, Instruction, PulseSequence};
use crate::error::{Error, Result};
use crate::qubit::Basis;

pub(super) fn to_text(seq: &PulseSequence) -> String {
    let mut out = format!("sites {}\n", seq.array_size);
    for ins in &seq.instructions {
        let d = ins.duration();
        let _ = match ins {
            Instruction::GlobalPulse { angle, drive_phase, .. } => {
                writeln!(out, "pulse {d} angle={angle} phase={drive_phase}")
            }
            Instruction::LocalShift { moves, .. } => {
                out.push_str(&format!("shift {d}"));
                for (site, dx) in moves {
                    let _ = write!(out, " {site}:{dx}");
                }
                writeln!(out)
            }
            Instruction::Wait { .. } => writeln!(out, "wait {d}"),
            Instruction::LocalPiFlip { sites, mode, pulse_duration, shift_time, pad, shift_nm } => {
                let list: Vec<String> = sites.iter().map(ToString::to_string).collect();
                writeln!(
                    out,
                    "flip {d} mode={} pulse={pulse_duration} shift_time={shift_time} pad={pad} move={shift_nm} sites={}",
                    mode.as_str(),
                    list.join(",")
                )
            }
            Instruction::Measure { bases } => {
                out.push_str("measure 0");
                for (site, b) in bases.iter().enumerate() {
                    let _ = write!(out, " {site}:{}", b.as_char());
                }
                writeln!(out)
            }
        };
    }
    out
}

pub(super) fn parse(input: &str) -> Result<PulseSequence> {
    let mut seq: Option<PulseSequence> = None;
    for (i, raw) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse { line: line_no, message };
        let mut fields = line.split_whitespace();
        let op = fields.next().unwrap_or_default();
        let rest: Vec<&str> = fields.collect();
        if op == "sites" {
            if seq.is_some() || rest.len() != 1 {
                return Err(err("`sites` must appear once with one value".into()));
            }
            let n = rest[0].parse::<usize>().map_err(|e| err(format!("sites: {e}")))?;
            seq = Some(PulseSequence::new(n));
            continue;
        }
        let seq = seq.as_mut().ok_or_else(|| err("first line must be `sites <n>`".into()))?;
        let (dur_field, args) = rest.split_first().ok_or_else(|| err(format!("`{op}` needs a duration")))?;
        let duration = num(dur_field).map_err(&err)?;
        let ins = match op {
            "pulse" => {
                let kv = key_values(args, &["angle", "phase"]).map_err(&err)?;
                Instruction::GlobalPulse { angle: kv[0], drive_phase: kv[1], duration }
            }
            "wait" => {
                if !args.is_empty() {
                    return Err(err("`wait` takes only a duration".into()));
                }
                Instruction::Wait { duration }
            }
            "shift" => {
                let moves = args
                    .iter()
                    .map(|a| {
                        let (s, v) = a.split_once(':').ok_or_else(|| format!("expected site:value, got `{a}`"))?;
                        Ok((s.parse::<usize>().map_err(|e| format!("site: {e}"))?, num(v)?))
                    })
                    .collect::<std::result::Result<Vec<_>, String>>()
                    .map_err(&err)?;
                Instruction::LocalShift { moves, shift_time: duration }
            }
            "flip" => {
                let (mode_arg, others) = args.split_first().ok_or_else(|| err("flip needs arguments".into()))?;
                let mode = match *mode_arg {
                    "mode=composite" => FlipMode::Composite,
                    "mode=ideal" => FlipMode::Ideal,
                    other => return Err(err(format!("unknown flip mode `{other}`"))),
                };
                let (sites_arg, numeric) = others.split_last().ok_or_else(|| err("flip needs sites".into()))?;
                let kv = key_values(numeric, &["pulse", "shift_time", "pad", "move"]).map_err(&err)?;
                let list = sites_arg.strip_prefix("sites=").ok_or_else(|| err("expected sites=".into()))?;
                let sites = if list.is_empty() {
                    Vec::new()
                } else {
                    list.split(',')
                        .map(|s| s.parse::<usize>().map_err(|e| err(format!("sites: {e}"))))
                        .collect::<Result<Vec<_>>>()?
                };
                let ins = Instruction::LocalPiFlip {
                    sites,
                    mode,
                    pulse_duration: kv[0],
                    shift_time: kv[1],
                    pad: kv[2],
                    shift_nm: kv[3],
                };
                let expected = ins.duration();
                if (expected - duration).abs() > 1e-9 * (1.0 + expected.abs()) {
                    return Err(err(format!("flip duration {duration} does not match its parts ({expected})")));
                }
                ins
            }
            "measure" => {
                let mut bases = Vec::with_capacity(args.len());
                for (k, a) in args.iter().enumerate() {
                    let (s, b) = a.split_once(':').ok_or_else(|| err(format!("expected site:basis, got `{a}`")))?;
                    if s.parse::<usize>().ok() != Some(k) {
                        return Err(err(format!("measure sites must be listed in order, got `{a}`")));
                    }
                    let mut chars = b.chars();
                    let basis = match (chars.next().and_then(Basis::from_char), chars.next()) {
                        (Some(basis), None) => basis,
                        _ => return Err(err(format!("unknown basis `{b}`"))),
                    };
                    bases.push(basis);
                }
                Instruction::Measure { bases }
            }
            other => return Err(err(format!("unknown opcode `{other}`"))),
        };
        seq.instructions.push(ins);
    }
    seq.ok_or(Error::Parse { line: 0, message: "missing `sites` line".into() })
}

fn num(s: &str) -> std::result::Result<f64, String> {
    s.parse::<f64>().map_err(|e| format!("`{s}`: {e}"))
}

fn key_values(args: &[&str], keys: &[&str]) -> std::result::Result<Vec<f64>, String> {
    if args.len() != keys.len() {
        return Err(format!("expected {} fields ({}), got {}", keys.len(), keys.join(", "), args.len()));
    }
    args.iter()
        .zip(keys)
        .map(|(a, k)| {
            let v = a.strip_prefix(k).and_then(|r| r.strip_prefix('=')).ok_or_else(|| format!("expected {k}=, got `{a}`"))?;
            num(v)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::{build_kernel_schedule, CompileOptions, EnsembleLayout};
    use proptest::prelude::*;

    #[test]
    fn compiled_schedule_round_trips() {
        let layout = EnsembleLayout::blocks(8, 3).unwrap();
        let (seq, _) = build_kernel_schedule(&layout, 2, 30_000.0, &CompileOptions::default()).unwrap();
        let text = seq.to_text();
        assert_eq!(PulseSequence::parse(&text).unwrap(), seq);
        assert!(text.lines().next().unwrap() == "sites 8");
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(PulseSequence::parse("pulse 1 angle=1 phase=0"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(PulseSequence::parse("sites 2\nwait x"), Err(Error::Parse { line: 2, .. })));
        assert!(PulseSequence::parse("sites 2\nmeasure 0 0:Z 1:Q").is_err());
        assert!(PulseSequence::parse("sites 2\nflip 5 mode=ideal pulse=4 shift_time=0 pad=0 move=0 sites=1").is_err());
        assert!(PulseSequence::parse("sites 2\nteleport 1").is_err());
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![-1e6..1e6f64, Just(0.0), (0u32..1000).prop_map(|x| x as f64 * 0.1)]
    }

    fn instruction(n: usize) -> impl Strategy<Value = Instruction> {
        let basis = prop_oneof![Just(Basis::X), Just(Basis::Y), Just(Basis::Z)];
        prop_oneof![
            (finite(), finite(), 0.0..1e4f64).prop_map(|(angle, drive_phase, duration)| Instruction::GlobalPulse { angle, drive_phase, duration }),
            (proptest::collection::vec((0..n, finite()), 0..4), 0.0..100.0f64).prop_map(|(moves, shift_time)| Instruction::LocalShift { moves, shift_time }),
            (0.0..1e5f64).prop_map(|duration| Instruction::Wait { duration }),
            (proptest::collection::vec(0..n, 0..4), any::<bool>(), 0.0..200.0f64, 0.0..50.0f64, 0.0..50.0f64, finite()).prop_map(
                |(sites, composite, pulse_duration, shift_time, pad, shift_nm)| Instruction::LocalPiFlip {
                    sites,
                    mode: if composite { FlipMode::Composite } else { FlipMode::Ideal },
                    pulse_duration,
                    shift_time: if composite { shift_time } else { 0.0 },
                    pad: if composite { pad } else { 0.0 },
                    shift_nm,
                }
            ),
            proptest::collection::vec(basis, n).prop_map(|bases| Instruction::Measure { bases }),
        ]
    }

    proptest! {
        #[test]
        fn text_round_trip(ins in proptest::collection::vec(instruction(5), 0..12)) {
            let seq = PulseSequence { array_size: 5, instructions: ins };
            prop_assert_eq!(PulseSequence::parse(&seq.to_text()).unwrap(), seq);
        }
    }
}
