//! Line-delimited sample records exchanged between export, analysis and
//! classification.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::ci::{CiLabel, CiTrial};
use crate::error::{Error, Result};
use crate::latent::LatentVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum SampleRecord {
    /// A retained chain state; `index` is its position in the chain.
    Mcmcp {
        chain_id: String,
        category: String,
        index: usize,
        values: LatentVector,
    },
    /// One answered classification-image trial.
    Ci {
        trial_id: String,
        category: String,
        index: usize,
        chosen: LatentVector,
        unchosen: LatentVector,
    },
}

impl SampleRecord {
    pub fn category(&self) -> &str {
        match self {
            SampleRecord::Mcmcp { category, .. } | SampleRecord::Ci { category, .. } => category,
        }
    }

    pub fn from_ci_trials(trials: &[CiTrial]) -> Vec<SampleRecord> {
        trials
            .iter()
            .enumerate()
            .filter_map(|(index, t)| {
                let (chosen, unchosen) = t.chosen_and_unchosen()?;
                Some(SampleRecord::Ci {
                    trial_id: t.trial_id.clone(),
                    category: t.category.clone(),
                    index,
                    chosen: chosen.clone(),
                    unchosen: unchosen.clone(),
                })
            })
            .collect()
    }

    /// Answered CI trials rebuilt with the chosen stimulus in slot A.
    pub fn to_ci_trial(&self) -> Option<CiTrial> {
        match self {
            SampleRecord::Ci {
                trial_id,
                category,
                chosen,
                unchosen,
                ..
            } => Some(CiTrial {
                trial_id: trial_id.clone(),
                category: category.clone(),
                stimulus_a: chosen.clone(),
                stimulus_b: unchosen.clone(),
                true_class: None,
                chosen: Some(CiLabel::A),
            }),
            SampleRecord::Mcmcp { .. } => None,
        }
    }
}

pub fn write_samples<W: Write>(mut writer: W, records: &[SampleRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_samples<R: BufRead>(reader: R) -> Result<Vec<SampleRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Domain(format!("sample line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_tag() {
        let records = vec![
            SampleRecord::Mcmcp {
                chain_id: "a/0".into(),
                category: "a".into(),
                index: 4,
                values: LatentVector(vec![0.1, 1.0 / 3.0]),
            },
            SampleRecord::Ci {
                trial_id: "t".into(),
                category: "b".into(),
                index: 0,
                chosen: LatentVector(vec![1.0]),
                unchosen: LatentVector(vec![-1.0]),
            },
        ];
        let mut buf = Vec::new();
        write_samples(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(r#"{"method":"mcmcp","#));
        assert_eq!(read_samples(&buf[..]).unwrap(), records);
        assert_eq!(records[1].to_ci_trial().unwrap().chosen, Some(CiLabel::A));
    }
}
