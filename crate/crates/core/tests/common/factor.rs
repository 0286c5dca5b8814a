//! Random factorisation cases.

use irw_core::compression::factorise;
use irw_core::denotation::steps_count;
use irw_core::equivalence::{check_derivation, Mode};
use irw_core::proofterm::{is_convergent, is_pnpterm, mind};
use irw_core::pterm::{pt_cmp, Cmp, Pt};
use irw_core::syntax::parse_term;
use rand::Rng;

use super::{example, gen};

/// Random convergent proof terms over the multistep system, random `n ≤ 4`.
pub fn factorise_random(cases: usize, seed: u64) -> Result<usize, String> {
    let ws = example("mstep.irw");
    let t = &ws.trs;
    let fns = gen::functions(t);
    let m_w = parse_term("m^w", &t.sig).unwrap();
    let seeds = vec![(m_w.clone(), parse_term("pi^w", &t.sig).unwrap())];
    let mut r = gen::rng(seed);
    let mut done = 0;
    while done < cases {
        let s = gen::finite(&mut r, &fns, 4, &[m_w.clone()]);
        let size = r.gen_range(0..6);
        let Some(p) = gen::pt_on(&mut r, t, &s, size, &seeds) else { continue };
        if !is_convergent(t, &p) {
            continue;
        }
        let n = r.gen_range(0..=4);
        let f = factorise(t, &p, n).map_err(|e| format!("factorise({p}, {n}): {e}"))?;
        if !is_pnpterm(t, &f.chi) || !steps_count(t, &f.chi).map_err(|e| e.to_string())?.is_finite() {
            return Err(format!("factorise({p}, {n}): chi {} is not a finite pnpterm", f.chi));
        }
        if !mind(t, &f.phi).map_err(|e| e.to_string())?.is_none_or(|m| m > n) {
            return Err(format!("factorise({p}, {n}): mind of {} is at most {n}", f.phi));
        }
        check_derivation(t, &f.deriv, Mode::Full).map_err(|e| format!("factorise({p}, {n}): {e}"))?;
        let whole = Pt::comp(f.chi.clone(), f.phi.clone());
        if f.deriv.lhs != p || pt_cmp(&f.deriv.rhs, &whole, 8).map_err(|e| e.to_string())? != Cmp::Equal {
            return Err(format!("factorise({p}, {n}): derivation ends at {} ≈ {}", f.deriv.lhs, f.deriv.rhs));
        }
        done += 1;
    }
    Ok(done)
}
