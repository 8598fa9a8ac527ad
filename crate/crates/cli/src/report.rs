use serde::Serialize;

use dnnbound::instances::PopInstance;
use dnnbound::solver::SolveOutcome;

/// One solved instance, with the table columns plus the resolved configuration.
#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub instance: String,
    pub n: usize,
    pub d: u32,
    pub omega: u32,
    pub ell: usize,
    pub block_sizes: Vec<usize>,
    /// Certified lower bound, exactly `BoundCertificate::y0_vl`.
    pub lbv: f64,
    pub sec: f64,
    pub apgit: usize,
    pub bpit: usize,
    pub term: u8,
    pub rho: f64,
    pub upper_bound: f64,
    pub y0_l: f64,
    pub y0_u: f64,
    pub config: serde_json::Value,
}

impl SolveReport {
    pub fn new(instance: String, pop: &PopInstance, out: &SolveOutcome, config: serde_json::Value) -> Self {
        let c = &out.certificate;
        SolveReport {
            instance,
            n: pop.n(),
            d: out.cop.degree,
            omega: out.cop.omega,
            ell: out.cop.num_blocks(),
            block_sizes: out.cop.block_sizes(),
            lbv: c.y0_vl,
            sec: c.wall_time,
            apgit: c.apg_total_iterations,
            bpit: c.bp_iterations,
            term: c.term_code,
            rho: out.cop.rho,
            upper_bound: out.upper_bound,
            y0_l: c.y0_l,
            y0_u: c.y0_u,
            config,
        }
    }
}

pub fn csv_header() -> &'static str {
    "instance,d,n,ell,LBv,sec,apgit,bpit,term"
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn csv_row(r: &SolveReport) -> String {
    format!(
        "{},{},{},{},{},{:.3},{},{},{}",
        quote(&r.instance),
        r.d,
        r.n,
        r.ell,
        r.lbv,
        r.sec,
        r.apgit,
        r.bpit,
        r.term
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quoting() {
        assert_eq!(quote("chr12a"), "chr12a");
        assert_eq!(quote("a,b"), "\"a,b\"");
    }
}
