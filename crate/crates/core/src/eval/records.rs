//! CSV dataset manifests. Every manifest has a header row; image paths are
//! resolved relative to the manifest's directory.
//!
//! | protocol | columns                           |
//! |----------|-----------------------------------|
//! | qa       | `reference,distorted,dmos`        |
//! | jnd      | `image1,image2,score`             |
//! | 2afc     | `reference,image1,image2,p`       |

use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Protocol {
    #[serde(rename = "qa")]
    Qa,
    #[serde(rename = "jnd")]
    Jnd,
    #[serde(rename = "2afc")]
    Afc,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Qa => "qa",
            Protocol::Jnd => "jnd",
            Protocol::Afc => "2afc",
        })
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qa" => Ok(Protocol::Qa),
            "jnd" => Ok(Protocol::Jnd),
            "2afc" => Ok(Protocol::Afc),
            other => Err(Error::Eval(format!(
                "unknown protocol '{other}' (expected qa, jnd or 2afc)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaRecord {
    pub reference: PathBuf,
    pub distorted: PathBuf,
    pub dmos: f64,
}

/// Share of observers that reported a visible difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JndScore {
    #[serde(rename = "0")]
    None,
    #[serde(rename = "1/3")]
    OneThird,
    #[serde(rename = "2/3")]
    TwoThirds,
    #[serde(rename = "1")]
    All,
}

impl JndScore {
    pub fn value(self) -> f64 {
        match self {
            JndScore::None => 0.0,
            JndScore::OneThird => 1.0 / 3.0,
            JndScore::TwoThirds => 2.0 / 3.0,
            JndScore::All => 1.0,
        }
    }

    /// Binarized label: `true` ("different") when the score is at least 1/2.
    pub fn is_different(self) -> bool {
        self.value() >= 0.5
    }

    /// Accepts the four rationals as fractions or decimals within 1e-3.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        let v = match t {
            "1/3" => return Ok(JndScore::OneThird),
            "2/3" => return Ok(JndScore::TwoThirds),
            _ => t
                .parse::<f64>()
                .map_err(|_| Error::Eval(format!("invalid JND score '{text}'")))?,
        };
        [JndScore::None, JndScore::OneThird, JndScore::TwoThirds, JndScore::All]
            .into_iter()
            .find(|s| (s.value() - v).abs() < 1e-3)
            .ok_or_else(|| {
                Error::Eval(format!(
                    "JND score {text} is not one of 0, 1/3, 2/3, 1"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JndRecord {
    pub image1: PathBuf,
    pub image2: PathBuf,
    pub score: JndScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AfcRecord {
    pub reference: PathBuf,
    pub image1: PathBuf,
    pub image2: PathBuf,
    /// Fraction of observers who chose `image1`.
    pub p: f64,
}

#[derive(Deserialize)]
struct RawJnd {
    image1: PathBuf,
    image2: PathBuf,
    score: String,
}

/// Records of any protocol.
#[derive(Debug, Clone, PartialEq)]
pub enum Manifest {
    Qa(Vec<QaRecord>),
    Jnd(Vec<JndRecord>),
    Afc(Vec<AfcRecord>),
}

impl Manifest {
    pub fn protocol(&self) -> Protocol {
        match self {
            Manifest::Qa(_) => Protocol::Qa,
            Manifest::Jnd(_) => Protocol::Jnd,
            Manifest::Afc(_) => Protocol::Afc,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Manifest::Qa(r) => r.len(),
            Manifest::Jnd(r) => r.len(),
            Manifest::Afc(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let rows = reader
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| Error::Eval(format!("{}: {e}", path.display())))?;
    if rows.is_empty() {
        return Err(Error::EmptyInput(format!("{} has no records", path.display())));
    }
    Ok(rows)
}

fn resolve(base: &Path, p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

/// Reads a manifest of the given protocol, resolving image paths.
pub fn load_manifest(path: impl AsRef<Path>, protocol: Protocol) -> Result<Manifest> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
    Ok(match protocol {
        Protocol::Qa => {
            let rows: Vec<QaRecord> = read_rows(path)?;
            let mut out = Vec::with_capacity(rows.len());
            for r in rows {
                if !r.dmos.is_finite() {
                    return Err(Error::Eval(format!(
                        "{}: DMOS must be finite",
                        path.display()
                    )));
                }
                out.push(QaRecord {
                    reference: resolve(&base, r.reference),
                    distorted: resolve(&base, r.distorted),
                    dmos: r.dmos,
                });
            }
            Manifest::Qa(out)
        }
        Protocol::Jnd => {
            let rows: Vec<RawJnd> = read_rows(path)?;
            let mut out = Vec::with_capacity(rows.len());
            for r in rows {
                out.push(JndRecord {
                    image1: resolve(&base, r.image1),
                    image2: resolve(&base, r.image2),
                    score: JndScore::parse(&r.score)?,
                });
            }
            Manifest::Jnd(out)
        }
        Protocol::Afc => {
            let rows: Vec<AfcRecord> = read_rows(path)?;
            let mut out = Vec::with_capacity(rows.len());
            for r in rows {
                if !(0.0..=1.0).contains(&r.p) {
                    return Err(Error::Eval(format!(
                        "{}: p = {} outside [0, 1]",
                        path.display(),
                        r.p
                    )));
                }
                out.push(AfcRecord {
                    reference: resolve(&base, r.reference),
                    image1: resolve(&base, r.image1),
                    image2: resolve(&base, r.image2),
                    p: r.p,
                });
            }
            Manifest::Afc(out)
        }
    })
}

fn relative(base: &Path, p: &Path) -> PathBuf {
    p.strip_prefix(base).map(Path::to_path_buf).unwrap_or_else(|_| p.to_path_buf())
}

/// Writes records as a manifest CSV; paths under the manifest's directory
/// are stored relative to it.
pub fn write_manifest(path: impl AsRef<Path>, manifest: &Manifest) -> Result<()> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    match manifest {
        Manifest::Qa(rows) => {
            for r in rows {
                w.serialize(QaRecord {
                    reference: relative(&base, &r.reference),
                    distorted: relative(&base, &r.distorted),
                    dmos: r.dmos,
                })?;
            }
        }
        Manifest::Jnd(rows) => {
            for r in rows {
                w.serialize(JndRecord {
                    image1: relative(&base, &r.image1),
                    image2: relative(&base, &r.image2),
                    score: r.score,
                })?;
            }
        }
        Manifest::Afc(rows) => {
            for r in rows {
                w.serialize(AfcRecord {
                    reference: relative(&base, &r.reference),
                    image1: relative(&base, &r.image1),
                    image2: relative(&base, &r.image2),
                    p: r.p,
                })?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jnd_score_parsing() {
        assert_eq!(JndScore::parse("0").unwrap(), JndScore::None);
        assert_eq!(JndScore::parse("1/3").unwrap(), JndScore::OneThird);
        assert_eq!(JndScore::parse("0.6667").unwrap(), JndScore::TwoThirds);
        assert_eq!(JndScore::parse("1.0").unwrap(), JndScore::All);
        assert!(JndScore::parse("0.5").is_err());
        assert!(!JndScore::OneThird.is_different());
        assert!(JndScore::TwoThirds.is_different());
    }

    #[test]
    fn manifests_round_trip_with_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("qa.csv");
        let m = Manifest::Qa(vec![QaRecord {
            reference: dir.path().join("ref.pgm"),
            distorted: dir.path().join("sub/d.pgm"),
            dmos: 1.5,
        }]);
        write_manifest(&path, &m).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "reference,distorted,dmos\nref.pgm,sub/d.pgm,1.5\n");
        assert_eq!(load_manifest(&path, Protocol::Qa).unwrap(), m);

        let path = dir.path().join("jnd.csv");
        let m = Manifest::Jnd(vec![JndRecord {
            image1: dir.path().join("a.pgm"),
            image2: dir.path().join("b.pgm"),
            score: JndScore::TwoThirds,
        }]);
        write_manifest(&path, &m).unwrap();
        assert!(std::fs::read_to_string(&path).unwrap().contains("a.pgm,b.pgm,2/3"));
        assert_eq!(load_manifest(&path, Protocol::Jnd).unwrap(), m);
    }

    #[test]
    fn empty_and_invalid_manifests() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        std::fs::write(&path, "reference,distorted,dmos\n").unwrap();
        assert!(matches!(
            load_manifest(&path, Protocol::Qa),
            Err(Error::EmptyInput(_))
        ));
        std::fs::write(&path, "reference,image1,image2,p\nr,a,b,1.5\n").unwrap();
        assert!(load_manifest(&path, Protocol::Afc).is_err());
        std::fs::write(&path, "reference,distorted\nr,a\n").unwrap();
        assert!(load_manifest(&path, Protocol::Qa).is_err());
    }

    #[test]
    fn protocol_names() {
        assert_eq!("2afc".parse::<Protocol>().unwrap(), Protocol::Afc);
        assert!("abx".parse::<Protocol>().is_err());
        assert_eq!(Protocol::Jnd.to_string(), "jnd");
    }
}
