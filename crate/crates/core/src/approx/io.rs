//! Text formats for enclosures and Galerkin states.
//!
//! Fields: a header `nshopf-field v1 rho=<r> varrho=<v> Ic=<i> Jc=<j> Kc=<k>`,
//! one line `n j k <decimal> [<radius>]` per nonzero coefficient and one line
//! `tail J K slot <decimal>` per tail. States: a header
//! `nshopf-state v1 kind=<kind> Ic= Jc= Kc= tri= gamma= alpha= s= theta=`
//! followed by `n j k <decimal>` lines.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{GalerkinState, Truncation};
use crate::ball::Ball;
use crate::error::{Error, Result};
use crate::field::{FieldEnclosure, SpaceParams};
use crate::maps::MapKind;
use crate::timepoly::FreqIndexMap;

const FIELD_MAGIC: &str = "nshopf-field";
const STATE_MAGIC: &str = "nshopf-state";
const VERSION: &str = "v1";

fn perr(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

/// Parse `magic version key=value ...`, requiring exactly the given keys.
fn header(line: &str, magic: &str, keys: &[&str]) -> Result<HashMap<String, String>> {
    let mut it = line.split_whitespace();
    if it.next() != Some(magic) {
        return Err(perr(format!("expected a {magic} header, got {line:?}")));
    }
    match it.next() {
        Some(VERSION) => {}
        v => return Err(perr(format!("unsupported version {v:?}, expected {VERSION}"))),
    }
    let mut out = HashMap::new();
    for kv in it {
        let (k, v) = kv.split_once('=').ok_or_else(|| perr(format!("malformed header entry {kv:?}")))?;
        if !keys.contains(&k) {
            return Err(perr(format!("unknown header key {k:?}")));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(perr(format!("duplicate header key {k:?}")));
        }
    }
    for k in keys {
        if !out.contains_key(*k) {
            return Err(perr(format!("header lacks {k}")));
        }
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| perr(format!("bad {what}: {s:?}")))
}

fn data_lines(s: &str) -> impl Iterator<Item = (usize, &str)> {
    s.lines().enumerate().skip(1).map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn write_field(f: &FieldEnclosure) -> String {
    let p = f.params();
    let ic = p.map.max_freq();
    let mut s = String::new();
    writeln!(s, "{FIELD_MAGIC} {VERSION} rho={:e} varrho={:e} Ic={ic} Jc={} Kc={}", p.rho, p.varrho, p.jc, p.kc).unwrap();
    for j in 1..=p.jc {
        for k in 1..=p.kc {
            for &fr in p.map.freqs() {
                let signs: &[i64] = if fr == 0 { &[1] } else { &[1, -1] };
                for &sg in signs {
                    let n = sg * fr as i64;
                    let c = f.get(n, j, k);
                    if c.is_zero() {
                        continue;
                    }
                    if c.radius() == 0.0 {
                        writeln!(s, "{n} {j} {k} {:e}", c.center()).unwrap();
                    } else {
                        writeln!(s, "{n} {j} {k} {:e} {:e}", c.center(), c.radius()).unwrap();
                    }
                }
            }
        }
    }
    for (j, k, i, e) in f.tail_entries() {
        writeln!(s, "tail {j} {k} {} {:e}", p.map.freq(i), e).unwrap();
    }
    s
}

/// Read a field; coefficients become balls enclosing their decimals.
pub fn read_field(s: &str) -> Result<FieldEnclosure> {
    let first = s.lines().next().ok_or_else(|| perr("empty field file"))?;
    let h = header(first, FIELD_MAGIC, &["rho", "varrho", "Ic", "Jc", "Kc"])?;
    let rho: f64 = num(&h["rho"], "rho")?;
    let varrho: f64 = num(&h["varrho"], "varrho")?;
    let ic: usize = num(&h["Ic"], "Ic")?;
    let jc: usize = num(&h["Jc"], "Jc")?;
    let kc: usize = num(&h["Kc"], "Kc")?;
    let mut coeffs = Vec::new();
    let mut tails = Vec::new();
    let (mut je, mut ke) = (jc + 1, kc + 1);
    for (ln, line) in data_lines(s) {
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.first() == Some(&"tail") {
            if t.len() != 5 {
                return Err(perr(format!("line {ln}: expected `tail J K slot value`")));
            }
            let (j, k): (usize, usize) = (num(t[1], "J")?, num(t[2], "K")?);
            let f: u32 = num(t[3], "slot")?;
            let e = Ball::enclose_decimal(t[4])?;
            if e.lo() < 0.0 {
                return Err(perr(format!("line {ln}: negative tail")));
            }
            je = je.max(j);
            ke = ke.max(k);
            tails.push((j, k, f, e.hi()));
            continue;
        }
        if t.len() != 4 && t.len() != 5 {
            return Err(perr(format!("line {ln}: expected `n j k value [radius]`")));
        }
        let n: i64 = num(t[0], "n")?;
        let (j, k): (usize, usize) = (num(t[1], "j")?, num(t[2], "k")?);
        if n.unsigned_abs() as usize > ic || j == 0 || k == 0 || j > jc || k > kc {
            return Err(perr(format!("line {ln}: coefficient ({n},{j},{k}) outside the header's shape")));
        }
        let mut c = Ball::enclose_decimal(t[3])?;
        if t.len() == 5 {
            let r = Ball::enclose_decimal(t[4])?;
            c = c.inflate(r.hi());
        }
        coeffs.push((n, j, k, c));
    }
    let p = SpaceParams::new(rho, varrho, jc, kc, je, ke, FreqIndexMap::identity(ic)).map_err(|e| perr(e.to_string()))?;
    let mut f = FieldEnclosure::from_terms(&p, &coeffs)?;
    for (j, k, fr, e) in tails {
        f.add_tail_freq(j, k, fr, e).map_err(|e| perr(e.to_string()))?;
    }
    Ok(f)
}

fn kind_name(k: MapKind) -> &'static str {
    match k {
        MapKind::Bifurcation => "bifurcation",
        MapKind::Periodic => "periodic",
        MapKind::Stationary => "stationary",
    }
}

pub fn write_state(st: &GalerkinState) -> String {
    let t = st.trunc;
    let tri = t.tri.map_or("none".to_string(), |v| v.to_string());
    let mut s = String::new();
    writeln!(
        s,
        "{STATE_MAGIC} {VERSION} kind={} Ic={} Jc={} Kc={} tri={tri} gamma={:e} alpha={:e} s={:e} theta={:e}",
        kind_name(st.kind),
        t.ic,
        t.jc,
        t.kc,
        st.gamma,
        st.alpha,
        st.s,
        st.theta
    )
    .unwrap();
    let ic = t.ic as i64;
    for (j, k) in t.cells() {
        for n in -ic..=ic {
            let v = st.get(n, j, k);
            if v != 0.0 {
                writeln!(s, "{n} {j} {k} {v:e}").unwrap();
            }
        }
    }
    s
}

pub fn read_state(s: &str) -> Result<GalerkinState> {
    let first = s.lines().next().ok_or_else(|| perr("empty state file"))?;
    let h = header(first, STATE_MAGIC, &["kind", "Ic", "Jc", "Kc", "tri", "gamma", "alpha", "s", "theta"])?;
    let kind = match h["kind"].as_str() {
        "bifurcation" => MapKind::Bifurcation,
        "periodic" => MapKind::Periodic,
        "stationary" => MapKind::Stationary,
        k => return Err(perr(format!("unknown kind {k:?}"))),
    };
    let mut trunc = Truncation::new(num(&h["Ic"], "Ic")?, num(&h["Jc"], "Jc")?, num(&h["Kc"], "Kc")?);
    if h["tri"] != "none" {
        trunc = trunc.triangular(num(&h["tri"], "tri")?);
    }
    let mut st = GalerkinState::zero(trunc, kind);
    st.gamma = num(&h["gamma"], "gamma")?;
    st.alpha = num(&h["alpha"], "alpha")?;
    st.s = num(&h["s"], "s")?;
    st.theta = num(&h["theta"], "theta")?;
    for (ln, line) in data_lines(s) {
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 4 {
            return Err(perr(format!("line {ln}: expected `n j k value`")));
        }
        let n: i64 = num(t[0], "n")?;
        let (j, k): (usize, usize) = (num(t[1], "j")?, num(t[2], "k")?);
        if n.unsigned_abs() as usize > trunc.ic || !trunc.holds(j, k) {
            return Err(perr(format!("line {ln}: coefficient ({n},{j},{k}) outside the header's truncation")));
        }
        let v: f64 = num(t[3], "value")?;
        if !v.is_finite() {
            return Err(perr(format!("line {ln}: non-finite value")));
        }
        st.set(n, j, k, v);
    }
    Ok(st)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_round_trip_keeps_centers() {
        let p = SpaceParams::standard(3, 2, FreqIndexMap::identity(1));
        let mut f = FieldEnclosure::from_terms(&p, &[(1, 2, 1, Ball::exact(0.1)), (-1, 3, 2, Ball::new(-2.5e-7, 1e-20).unwrap()), (0, 1, 1, Ball::exact(3.0))]).unwrap();
        f.add_tail_freq(4, 3, 1, 1e-9).unwrap();
        let g = read_field(&write_field(&f)).unwrap();
        for (n, j, k) in [(1, 2, 1), (-1, 3, 2), (0, 1, 1)] {
            assert_eq!(g.get(n, j, k).center(), f.get(n, j, k).center());
            assert!(g.get(n, j, k).radius() >= f.get(n, j, k).radius());
        }
        assert!(g.tail_total() >= 1e-9);
    }

    #[test]
    fn header_mismatch_is_rejected() {
        assert!(matches!(read_field("nshopf-field v2 rho=32 varrho=1 Ic=0 Jc=1 Kc=1\n"), Err(Error::Parse(_))));
        assert!(matches!(read_field("nshopf-state v1 kind=stationary\n"), Err(Error::Parse(_))));
        assert!(matches!(read_field("nshopf-field v1 rho=32 varrho=1.0039 Ic=0 Jc=1\n"), Err(Error::Parse(_))));
        assert!(matches!(read_field("nshopf-field v1 rho=32 varrho=1.0039 Ic=0 Jc=1 Kc=1\n0 2 1 1.0\n"), Err(Error::Parse(_))));
    }

    #[test]
    fn state_round_trip() {
        let mut st = GalerkinState::forcing(Truncation::new(1, 4, 3), 7.25).unwrap();
        st.set(-1, 2, 3, 1.0 / 3.0);
        st.alpha = 4.5;
        let back = read_state(&write_state(&st)).unwrap();
        assert_eq!(back, st);
    }
}
