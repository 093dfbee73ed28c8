//! Versioned line-oriented text format for fitted models.
//!
//! ```text
//! homesim-model 1
//! anomaly <kebab-case name>
//! method st|dt|rf|dnb|hmm
//! sensors <S>
//! <method-specific lines>
//! ```
//!
//! Threshold models hold up to two lines `detector sleep|outings
//! above|below mu sigma c theta min_run`. Trees are `tree <nodes>`
//! followed by one line per node, either `leaf <class> <w0> <w1>` or
//! `split <feature> <threshold> <left> <right>`. Forests list
//! `motion_ids ...` and `trees <n>` before their trees. Sequence models
//! carry `variant`, `pi`, `a` (row-major) and one `b <sensor> <p0> <p1>`
//! line per sensor. Reals are written in shortest round-trip form.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use super::cart::{Node, Tree};
use super::forest::ForestModel;
use super::sequence::{SequenceModel, Variant};
use super::threshold::{Direction, ThresholdDetector};
use crate::anomalies::AnomalyKind;
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    St,
    Dt,
    Rf,
    Dnb,
    Hmm,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::St, Method::Dt, Method::Rf, Method::Dnb, Method::Hmm];

    pub fn name(self) -> &'static str {
        match self {
            Method::St => "st",
            Method::Dt => "dt",
            Method::Rf => "rf",
            Method::Dnb => "dnb",
            Method::Hmm => "hmm",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name().to_ascii_uppercase())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let l = s.trim().to_ascii_lowercase();
        Method::ALL.into_iter().find(|m| m.name() == l).ok_or_else(|| Error::InvalidParameter(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Threshold { sleep: Option<ThresholdDetector<f64>>, outings: Option<ThresholdDetector<f64>> },
    Tree(Tree),
    Forest(ForestModel),
    Sequence(SequenceModel<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub anomaly: AnomalyKind,
    pub method: Method,
    pub sensors: usize,
    pub model: Model,
}

fn write_tree(t: &Tree, w: &mut impl Write) -> Result<()> {
    writeln!(w, "tree {} {}", t.nodes.len(), t.features)?;
    for n in &t.nodes {
        match n {
            Node::Leaf { class, counts } => writeln!(w, "leaf {} {} {}", *class as u8, counts[0], counts[1])?,
            Node::Split { feature, threshold, left, right } => writeln!(w, "split {feature} {threshold} {left} {right}")?,
        }
    }
    Ok(())
}

fn write_detector(name: &str, d: &ThresholdDetector<f64>, w: &mut impl Write) -> Result<()> {
    let dir = match d.direction {
        Direction::Above => "above",
        Direction::Below => "below",
    };
    writeln!(w, "detector {name} {dir} {} {} {} {} {}", d.mu, d.sigma, d.c, d.theta, d.min_run_days)?;
    Ok(())
}

impl ModelFile {
    pub fn write(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "homesim-model {FORMAT_VERSION}")?;
        writeln!(w, "anomaly {}", self.anomaly.name())?;
        writeln!(w, "method {}", self.method.name())?;
        writeln!(w, "sensors {}", self.sensors)?;
        match &self.model {
            Model::Threshold { sleep, outings } => {
                if let Some(d) = sleep {
                    write_detector("sleep", d, &mut w)?;
                }
                if let Some(d) = outings {
                    write_detector("outings", d, &mut w)?;
                }
            }
            Model::Tree(t) => write_tree(t, &mut w)?,
            Model::Forest(f) => {
                let ids: Vec<String> = f.motion_ids.iter().map(|i| i.to_string()).collect();
                writeln!(w, "motion_ids {}", ids.join(" "))?;
                writeln!(w, "trees {}", f.trees.len())?;
                for t in &f.trees {
                    write_tree(t, &mut w)?;
                }
            }
            Model::Sequence(m) => {
                let v = match m.variant {
                    Variant::Dnb => "dnb",
                    Variant::Hmm => "hmm",
                };
                writeln!(w, "variant {v}")?;
                writeln!(w, "pi {} {}", m.pi[0], m.pi[1])?;
                writeln!(w, "a {} {} {} {}", m.a[0][0], m.a[0][1], m.a[1][0], m.a[1][1])?;
                for (s, p) in m.b.iter().enumerate() {
                    writeln!(w, "b {s} {} {}", p[0], p[1])?;
                }
            }
        }
        Ok(())
    }

    pub fn read(r: impl BufRead) -> Result<Self> {
        let mut lines = Lines::new(r)?;
        let head = lines.expect("homesim-model")?;
        let version: u32 = lines.parse(&head, 1)?;
        if version != FORMAT_VERSION {
            return Err(Error::Model(format!("unsupported model format version {version}")));
        }
        let l = lines.expect("anomaly")?;
        let anomaly: AnomalyKind = lines.word(&l, 1)?.parse()?;
        let l = lines.expect("method")?;
        let method: Method = lines.word(&l, 1)?.parse()?;
        let s = lines.expect("sensors")?;
        let sensors = lines.parse(&s, 1)?;
        let model = match method {
            Method::St => {
                let (mut sleep, mut outings) = (None, None);
                while let Some(l) = lines.next_if("detector")? {
                    let dir = match lines.word(&l, 2)? {
                        "above" => Direction::Above,
                        "below" => Direction::Below,
                        o => return Err(lines.err(format!("bad direction '{o}'"))),
                    };
                    let mut d = ThresholdDetector::new(lines.parse(&l, 3)?, lines.parse(&l, 4)?, lines.parse(&l, 5)?, dir);
                    d.theta = lines.parse(&l, 6)?;
                    d.min_run_days = lines.parse(&l, 7)?;
                    match lines.word(&l, 1)? {
                        "sleep" => sleep = Some(d),
                        "outings" => outings = Some(d),
                        o => return Err(lines.err(format!("unknown detector '{o}'"))),
                    }
                }
                Model::Threshold { sleep, outings }
            }
            Method::Dt => Model::Tree(lines.tree()?),
            Method::Rf => {
                let l = lines.expect("motion_ids")?;
                let motion_ids = l.split_whitespace().skip(1).map(|v| v.parse().map_err(|_| lines.err("bad id".into()))).collect::<Result<_>>()?;
                let l = lines.expect("trees")?;
                let n: usize = lines.parse(&l, 1)?;
                let trees = (0..n).map(|_| lines.tree()).collect::<Result<_>>()?;
                Model::Forest(ForestModel { motion_ids, trees })
            }
            Method::Dnb | Method::Hmm => {
                let l = lines.expect("variant")?;
                let variant = match lines.word(&l, 1)? {
                    "dnb" => Variant::Dnb,
                    "hmm" => Variant::Hmm,
                    o => return Err(lines.err(format!("bad variant '{o}'"))),
                };
                let p = lines.expect("pi")?;
                let pi = [lines.parse(&p, 1)?, lines.parse(&p, 2)?];
                let a = lines.expect("a")?;
                let a = [[lines.parse(&a, 1)?, lines.parse(&a, 2)?], [lines.parse(&a, 3)?, lines.parse(&a, 4)?]];
                let mut b = Vec::new();
                while let Some(l) = lines.next_if("b")? {
                    b.push([lines.parse(&l, 2)?, lines.parse(&l, 3)?]);
                }
                Model::Sequence(SequenceModel { variant, sensors: b.len(), pi, a, b })
            }
        };
        Ok(Self { anomaly, method, sensors, model })
    }
}

struct Lines {
    lines: Vec<String>,
    at: usize,
}

impl Lines {
    fn new(r: impl BufRead) -> Result<Self> {
        let lines = r.lines().collect::<std::io::Result<Vec<_>>>()?;
        Ok(Self { lines, at: 0 })
    }

    fn err(&self, message: String) -> Error {
        Error::Parse { line: self.at as u64, message }
    }

    fn next_if(&mut self, key: &str) -> Result<Option<String>> {
        while self.at < self.lines.len() && self.lines[self.at].trim().is_empty() {
            self.at += 1;
        }
        match self.lines.get(self.at) {
            Some(l) if l.split_whitespace().next() == Some(key) => {
                self.at += 1;
                Ok(Some(l.clone()))
            }
            _ => Ok(None),
        }
    }

    fn expect(&mut self, key: &str) -> Result<String> {
        self.next_if(key)?.ok_or_else(|| Error::Parse { line: self.at as u64 + 1, message: format!("expected '{key}'") })
    }

    fn word<'a>(&self, l: &'a str, i: usize) -> Result<&'a str> {
        l.split_whitespace().nth(i).ok_or_else(|| self.err(format!("missing field {i}")))
    }

    fn parse<T: FromStr>(&self, l: &str, i: usize) -> Result<T> {
        self.word(l, i)?.parse().map_err(|_| self.err(format!("bad field {i}")))
    }

    fn tree(&mut self) -> Result<Tree> {
        let h = self.expect("tree")?;
        let n: usize = self.parse(&h, 1)?;
        let features: usize = self.parse(&h, 2)?;
        let mut nodes = Vec::with_capacity(n);
        for _ in 0..n {
            let node = if let Some(l) = self.next_if("leaf")? {
                Node::Leaf { class: self.parse::<u8>(&l, 1)? == 1, counts: [self.parse(&l, 2)?, self.parse(&l, 3)?] }
            } else {
                let l = self.expect("split")?;
                let (left, right): (usize, usize) = (self.parse(&l, 3)?, self.parse(&l, 4)?);
                if left >= n || right >= n {
                    return Err(self.err("child index out of range".into()));
                }
                Node::Split { feature: self.parse(&l, 1)?, threshold: self.parse(&l, 2)?, left, right }
            };
            nodes.push(node);
        }
        Ok(Tree { features, nodes })
    }
}
