use std::fmt::Write as _;

use super::{clear_mot, hota, identity, ClearMot, HotaResult, Identity, Sequence};
use crate::error::Result;

pub const REPORT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub hota: HotaResult,
    pub clear: ClearMot,
    pub identity: Identity,
}

pub fn evaluate(gt: &Sequence, pred: &Sequence) -> Result<Report> {
    Ok(Report {
        hota: hota(gt, pred)?,
        clear: clear_mot(gt, pred)?,
        identity: identity(gt, pred)?,
    })
}

impl Report {
    /// `key=value` lines; the headline metrics come first in a fixed order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let c = &self.clear;
        let _ = writeln!(s, "version={REPORT_VERSION}");
        for (k, v) in [
            ("HOTA", self.hota.hota),
            ("DetA", self.hota.det_a),
            ("AssA", self.hota.ass_a),
            ("MOTA", c.mota),
            ("IDF1", self.identity.idf1),
            ("MOTP", c.motp),
            ("IDP", self.identity.idp),
            ("IDR", self.identity.idr),
        ] {
            let _ = writeln!(s, "{k}={v:.6}");
        }
        for (k, v) in [
            ("IDSW", c.idsw),
            ("TP", c.tp),
            ("FP", c.fp),
            ("FN", c.fn_),
            ("GT", c.num_gt),
            ("PRED", c.num_pred),
        ] {
            let _ = writeln!(s, "{k}={v}");
        }
        for a in &self.hota.per_alpha {
            let _ = writeln!(
                s,
                "HOTA@{:.2}={:.6} DetA@{:.2}={:.6} AssA@{:.2}={:.6}",
                a.alpha, a.hota, a.alpha, a.det_a, a.alpha, a.ass_a
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::BoundingBox;

    #[test]
    fn headline_order() {
        let mut s = Sequence::new();
        s.push(1, 1, BoundingBox::new(0.5, 0.5, 0.1, 0.1)).unwrap();
        let text = evaluate(&s, &s).unwrap().to_text();
        let keys: Vec<&str> = text.lines().take(6).map(|l| l.split('=').next().unwrap()).collect();
        assert_eq!(keys, ["version", "HOTA", "DetA", "AssA", "MOTA", "IDF1"]);
        assert!(text.contains("HOTA=1.000000"));
    }
}
