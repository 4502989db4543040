//! Segmentation of the record stream into per-shift sequences.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::ProductionRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BoundaryFlags {
    /// First observation of a shift, i.e. a new Markov-chain realisation.
    pub begins_shift: bool,
    /// First observation of a production order.
    pub begins_order: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSequence {
    pub shift_key: String,
    pub records: Vec<ProductionRecord>,
    pub boundaries: Vec<BoundaryFlags>,
}

pub fn check_chronological(records: &[ProductionRecord]) -> Result<()> {
    match records.windows(2).position(|w| w[1].timestamp() < w[0].timestamp()) {
        Some(i) => Err(Error::Ordering(i + 1)),
        None => Ok(()),
    }
}

/// Boundary flags for `records`, continuing after `predecessor` when the
/// stream is a continuation of an earlier one.
pub fn boundary_flags(
    records: &[ProductionRecord],
    predecessor: Option<&ProductionRecord>,
) -> Result<Vec<BoundaryFlags>> {
    check_chronological(records)?;
    if let (Some(p), Some(first)) = (predecessor, records.first()) {
        if first.timestamp() < p.timestamp() {
            return Err(Error::Ordering(0));
        }
    }
    let mut prev = predecessor;
    let mut flags = Vec::with_capacity(records.len());
    for r in records {
        flags.push(BoundaryFlags {
            begins_shift: prev.is_none_or(|p| p.shift != r.shift),
            begins_order: prev.is_none_or(|p| p.pr_ord != r.pr_ord),
        });
        prev = Some(r);
    }
    Ok(flags)
}

pub fn segment_into_sequences(records: &[ProductionRecord]) -> Result<Vec<ShiftSequence>> {
    let flags = boundary_flags(records, None)?;
    let mut out: Vec<ShiftSequence> = Vec::new();
    for (r, f) in records.iter().zip(flags) {
        if f.begins_shift {
            out.push(ShiftSequence {
                shift_key: r.shift.clone(),
                records: Vec::new(),
                boundaries: Vec::new(),
            });
        }
        let seq = out.last_mut().expect("first record always begins a shift");
        seq.records.push(r.clone());
        seq.boundaries.push(f);
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use alloc::string::ToString;
    use chrono::{NaiveDate, NaiveTime};

    /// Rows n=66 and n=67 of the published sample.
    pub fn table_rows() -> Vec<ProductionRecord> {
        let base = |n, start: &str, shift: &str| ProductionRecord {
            n,
            date: NaiveDate::from_ymd_opt(2022, 10, 10).unwrap(),
            start: NaiveTime::parse_from_str(start, "%H:%M:%S").unwrap(),
            shift: shift.to_string(),
            pr_ord: 305,
            ics: 1.88,
            rcs: 0.0,
            tu: 13,
            du: 0,
            tgu: 0.0,
            nstops: 2,
            ot: 0.0,
            sbt: 0.0,
            lt: 0.0,
            dt: 0.0,
            opt: 0.0,
            plt: 0.0,
            nopt: 0.0,
            qlt: 0.0,
            vt: 0.0,
            lo: 0.0,
            av: 0.0,
            pf: 0.0,
            qu: 0.0,
            oee: 0.0,
            hum: 64.0,
            temp: 24.3,
        };
        let mut a = base(66, "13:50:24", "Mo M");
        a.du = 1;
        a.tgu = 13.1;
        a.rcs = 1.35;
        a.ot = 9.6;
        a.lt = 9.6;
        a.dt = 2.62;
        a.opt = 6.98;
        a.plt = 0.05;
        a.nopt = 6.93;
        a.qlt = 0.53;
        a.vt = 6.4;
        a.lo = 1.0;
        a.av = 0.73;
        a.pf = 0.99;
        a.qu = 0.92;
        a.oee = 0.67;
        let mut b = base(67, "14:00:00", "Mo A");
        b.tgu = 13.4;
        b.rcs = 1.34;
        b.ot = 9.69;
        b.lt = 9.69;
        b.dt = 2.52;
        b.opt = 7.17;
        b.plt = 0.37;
        b.nopt = 6.8;
        b.qlt = 0.0;
        b.vt = 6.8;
        b.lo = 1.0;
        b.av = 0.74;
        b.pf = 0.95;
        b.qu = 1.0;
        b.oee = 0.7;
        b.hum = 64.3;
        alloc::vec![a, b]
    }

    /// `count` ten-minute periods of one shift starting at 06:00.
    pub fn same_shift(count: usize) -> Vec<ProductionRecord> {
        let proto = table_rows().remove(0);
        (0..count)
            .map(|i| {
                let mut r = proto.clone();
                r.n = i as i64;
                r.start = NaiveTime::from_hms_opt(6, 0, 0).unwrap()
                    + chrono::Duration::minutes(10 * i as i64);
                r.opt = 5.0 + i as f64;
                r.nopt = 4.0 + i as f64;
                r
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn shift_change_splits_sequences() {
        let seqs = segment_into_sequences(&table_rows()).unwrap();
        assert_eq!(seqs.len(), 2);
        assert_eq!(seqs[0].shift_key, "Mo M");
        assert_eq!(seqs[1].shift_key, "Mo A");
        for s in &seqs {
            assert_eq!(s.records.len(), 1);
            assert!(s.boundaries[0].begins_shift);
        }
    }

    #[test]
    fn single_shift_is_one_sequence() {
        let seqs = segment_into_sequences(&same_shift(5)).unwrap();
        assert_eq!(seqs.len(), 1);
        assert_eq!(seqs[0].boundaries.iter().filter(|b| b.begins_shift).count(), 1);
    }

    #[test]
    fn order_change_mid_shift_keeps_sequence() {
        let mut rows = same_shift(3);
        rows[2].pr_ord = 306;
        let seqs = segment_into_sequences(&rows).unwrap();
        assert_eq!(seqs.len(), 1);
        let flags: Vec<bool> = seqs[0].boundaries.iter().map(|b| b.begins_order).collect();
        assert_eq!(flags, [true, false, true]);
    }

    #[test]
    fn unsorted_input_is_rejected() {
        let mut rows = same_shift(3);
        rows.swap(0, 2);
        assert_eq!(segment_into_sequences(&rows).unwrap_err(), Error::Ordering(1));
    }

    #[test]
    fn concatenation_reproduces_input() {
        let mut rows = same_shift(6);
        for r in rows.iter_mut().skip(3) {
            r.shift = "Mo A".into();
        }
        let seqs = segment_into_sequences(&rows).unwrap();
        let flat: Vec<_> = seqs.into_iter().flat_map(|s| s.records).collect();
        assert_eq!(flat, rows);
    }

    #[test]
    fn predecessor_continues_flags() {
        let rows = same_shift(3);
        let flags = boundary_flags(&rows[1..], Some(&rows[0])).unwrap();
        assert!(!flags[0].begins_shift);
        assert!(!flags[0].begins_order);
    }
}
