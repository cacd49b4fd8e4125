//! CSV dump of trajectory ensembles.

use std::io::Write;

use crate::counting::CountingObservable;
use crate::error::Result;
use crate::trajectory::sampler::{record_observable, TrajectoryRecord};

/// Lossless float formatting used by every CSV writer in the crate.
pub fn fmt_float(x: f64) -> String {
    // empty float sums are -0.0
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}")
}

/// Writes one row per record. Jump columns are padded to the longest record;
/// `entropy_value` is left empty when no entropy is available.
pub fn write_trajectories<W: Write>(
    out: W,
    records: &[TrajectoryRecord],
    obs: &CountingObservable,
    entropies: Option<&[Option<f64>]>,
) -> Result<()> {
    let k_max = records.iter().map(TrajectoryRecord::n_jumps).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["run_index".to_string(), "K".to_string()];
    header.extend((1..=k_max).map(|j| format!("t_{j}")));
    header.extend((1..=k_max).map(|j| format!("m_{j}")));
    header.extend(["i", "i_prime", "N_value", "entropy_value"].map(String::from));
    w.write_record(&header)?;

    for (k, r) in records.iter().enumerate() {
        let mut row = vec![k.to_string(), r.n_jumps().to_string()];
        row.extend((0..k_max).map(|j| r.jumps.get(j).map(|x| fmt_float(x.time)).unwrap_or_default()));
        row.extend((0..k_max).map(|j| r.jumps.get(j).map(|x| x.channel.to_string()).unwrap_or_default()));
        row.push(r.initial_label.to_string());
        row.push(r.final_label.to_string());
        row.push(fmt_float(record_observable(r, obs)));
        row.push(entropies.and_then(|e| e[k]).map(fmt_float).unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::sampler::Jump;

    #[test]
    fn padded_rows() {
        let records = vec![
            TrajectoryRecord { jumps: vec![], initial_label: 0, final_label: 1, horizon: 1.0 },
            TrajectoryRecord {
                jumps: vec![Jump { time: 0.25, channel: 1 }, Jump { time: 0.5, channel: 0 }],
                initial_label: 1,
                final_label: 0,
                horizon: 1.0,
            },
        ];
        let obs = CountingObservable::new(vec![1.0, 2.0]).unwrap();
        let mut buf = Vec::new();
        write_trajectories(&mut buf, &records, &obs, Some(&[None, Some(0.5)])).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "run_index,K,t_1,t_2,m_1,m_2,i,i_prime,N_value,entropy_value");
        assert_eq!(lines[1], "0,0,,,,,0,1,0.0000000000000000e0,");
        assert!(lines[2].starts_with("1,2,2.5000000000000000e-1,5.0000000000000000e-1,1,0,1,0,3.0"));
        assert!(lines[2].ends_with(",5.0000000000000000e-1"));
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
        }
    }
}
