//! Line-oriented text formats: traces, eviction schedules, public-private
//! schedules.
//!
//! A trace starts with `k m k_1 .. k_m` and continues with one `<agent> <local>`
//! request per line. Lines starting with `#` are comments, except that
//! `# universe n_1 .. n_m` fixes the per-agent universe sizes (otherwise they
//! are derived from the requests).

use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{derive_universe_sizes, Instance, Page, RequestTrace, ReserveConfig};
use crate::state::{Eviction, PpStep, Slot};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub msg: String,
}

fn err(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError {
        line,
        msg: msg.into(),
    }
}

fn numbers(line_no: usize, s: &str) -> Result<Vec<usize>, ParseError> {
    s.split_whitespace()
        .map(|tok| {
            tok.parse::<usize>()
                .map_err(|_| err(line_no, format!("expected an integer, found `{tok}`")))
        })
        .collect()
}

pub fn parse_trace(text: &str) -> Result<Instance, ParseError> {
    let mut header: Option<(usize, Vec<usize>)> = None;
    let mut universe: Option<(usize, Vec<usize>)> = None;
    let mut requests = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(rest) = comment.trim().strip_prefix("universe") {
                universe = Some((line_no, numbers(line_no, rest)?));
            }
            continue;
        }
        let nums = numbers(line_no, line)?;
        match header {
            None => {
                if nums.len() < 2 {
                    return Err(err(line_no, "header must be `k m k_1 .. k_m`"));
                }
                let (k, m) = (nums[0], nums[1]);
                if nums.len() != m + 2 {
                    return Err(err(
                        line_no,
                        format!(
                            "header declares {m} agents but lists {} reserves",
                            nums.len() - 2
                        ),
                    ));
                }
                header = Some((k, nums[2..].to_vec()));
            }
            Some(_) => {
                if nums.len() != 2 {
                    return Err(err(line_no, "request must be `<agent> <local_id>`"));
                }
                let (agent, local) = (u32::try_from(nums[0]), u32::try_from(nums[1]));
                match (agent, local) {
                    (Ok(a), Ok(l)) => requests.push(Page::new(a, l)),
                    _ => return Err(err(line_no, "page id out of range")),
                }
            }
        }
    }
    let (k, reserves) = header.ok_or_else(|| err(0, "missing header line"))?;
    let universe_sizes = match universe {
        Some((line_no, sizes)) => {
            if sizes.len() != reserves.len() {
                return Err(err(line_no, "universe line needs one size per agent"));
            }
            sizes
        }
        None => derive_universe_sizes(reserves.len(), &requests),
    };
    Ok(Instance::new(
        ReserveConfig::new(k, reserves, universe_sizes),
        RequestTrace::new(requests),
    ))
}

pub fn write_trace(instance: &Instance) -> String {
    let c = &instance.config;
    let mut out = String::new();
    let mut header = format!("{} {}", c.k, c.m());
    for r in &c.reserves {
        let _ = write!(header, " {r}");
    }
    out.push_str(&header);
    out.push('\n');
    if !c.universe_sizes.is_empty() {
        let sizes: Vec<String> = c.universe_sizes.iter().map(|n| n.to_string()).collect();
        let _ = writeln!(out, "# universe {}", sizes.join(" "));
    }
    for p in &instance.trace.requests {
        let _ = writeln!(out, "{} {}", p.agent, p.local);
    }
    out
}

pub fn parse_schedule(text: &str) -> Result<Vec<Eviction>, ParseError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| l.trim().parse::<Eviction>().map_err(|m| err(i + 1, m)))
        .collect()
}

pub fn write_schedule(schedule: &[Eviction]) -> String {
    schedule.iter().map(|e| format!("{e}\n")).collect()
}

fn parse_pp_step(s: &str) -> Result<PpStep, String> {
    let mut it = s.split_whitespace();
    let t = it
        .next()
        .and_then(|x| x.parse::<usize>().ok())
        .ok_or_else(|| format!("bad step `{s}`"))?;
    let (mut fetch, mut slot, mut evict, mut relocate) = (None, None, None, None);
    for tok in it {
        let (key, val) = tok
            .split_once('=')
            .ok_or_else(|| format!("unexpected token `{tok}`"))?;
        match key {
            "fetch" => fetch = Some(val.parse::<Page>()?),
            "evict" => evict = Some(val.parse::<Page>()?),
            "relocate" => relocate = Some(val.parse::<Page>()?),
            "slot" => {
                slot = Some(match val {
                    "private" => Slot::Private,
                    "public" => Slot::Public,
                    _ => return Err(format!("unknown slot `{val}`")),
                })
            }
            _ => return Err(format!("unexpected key `{key}`")),
        }
    }
    match (fetch, slot) {
        (Some(fetch), Some(slot)) => Ok(PpStep {
            t,
            fetch,
            slot,
            evict,
            relocate,
        }),
        _ => Err(format!("incomplete step `{s}`")),
    }
}

pub fn parse_pp_schedule(text: &str) -> Result<Vec<PpStep>, ParseError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| parse_pp_step(l.trim()).map_err(|m| err(i + 1, m)))
        .collect()
}

pub fn write_pp_schedule(steps: &[PpStep]) -> String {
    steps.iter().map(|s| format!("{s}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_round_trips_bit_exact() {
        let text = "3 2 1 0\n# universe 2 3\n1 0\n2 2\n1 1\n";
        let inst = parse_trace(text).unwrap();
        assert_eq!(inst.config.k, 3);
        assert_eq!(inst.config.reserves, vec![1, 0]);
        assert_eq!(inst.config.universe_sizes, vec![2, 3]);
        assert_eq!(inst.trace.len(), 3);
        assert_eq!(write_trace(&inst), text);
    }

    #[test]
    fn universe_is_derived_without_the_comment() {
        let inst = parse_trace("# hello\n2 1 0\n1 4\n1 0\n").unwrap();
        assert_eq!(inst.config.universe_sizes, vec![5]);
    }

    #[test]
    fn header_only_trace_is_empty() {
        let inst = parse_trace("2 1 0\n").unwrap();
        assert!(inst.trace.is_empty());
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(parse_trace("2 1 0\n1 x\n").unwrap_err().line, 2);
        assert_eq!(parse_trace("2 2 0\n").unwrap_err().line, 1);
        assert_eq!(parse_trace("2 1 0\n1 2 3\n").unwrap_err().line, 2);
        assert!(parse_trace("# only comments\n").is_err());
    }

    #[test]
    fn pp_schedule_round_trips() {
        let steps = vec![
            PpStep {
                t: 1,
                fetch: Page::new(1, 0),
                slot: Slot::Private,
                evict: None,
                relocate: None,
            },
            PpStep {
                t: 4,
                fetch: Page::new(2, 1),
                slot: Slot::Public,
                evict: Some(Page::new(1, 0)),
                relocate: Some(Page::new(1, 2)),
            },
        ];
        assert_eq!(
            parse_pp_schedule(&write_pp_schedule(&steps)).unwrap(),
            steps
        );
    }
}
