//! Rendering of term lists: the abbreviated bracket notation used for golden
//! comparisons and a hand-rolled JSON form for the CLI.
//!
//! Abbreviated notation, fixed once here so golden files are stable:
//! - A factor renders as its index tuple: conjoined "(2345)", pair "(16)"
//!   (δ⁻ index first). Indices above 9 switch to comma separation.
//! - A Θ-weighted list renders as "sum_part" followed by structure groups
//!   joined " + ". Structures sharing the same ordering-weight profile are
//!   grouped; the group's Θ sum renders as "Theta_{k,n}" or a
//!   parenthesized sum. Multi-structure groups wrap in parentheses when the
//!   whole expression is one group, braces otherwise; non-unit rational
//!   coefficients prefix the group ("1/9 {…}").
//! - Unconstrained (V) lists join structures with "+"; fixed-sign lists
//!   append " | signs=(−−++)" as an ASCII suffix.
//! - The empty list renders "0", the bare unit "1".

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use num_rational::Ratio;

use super::{Coeff, Factor, SignAssignment, TermList};
use alloc::collections::BTreeMap;

/// Renders one factor's index tuple.
fn factor_token(factor: &Factor, out: &mut String) {
    let indices = factor.indices();
    let wide = indices.iter().any(|&i| i > 9);
    out.push('(');
    for (pos, &i) in indices.iter().enumerate() {
        if wide && pos > 0 {
            out.push(',');
        }
        let _ = write!(out, "{i}");
    }
    out.push(')');
}

/// Renders a factor list as concatenated tokens ("(2345)(16)"), or "1" for
/// the empty product.
pub fn structure_token(factors: &[Factor]) -> String {
    if factors.is_empty() {
        return String::from("1");
    }
    let mut out = String::new();
    for f in factors {
        factor_token(f, &mut out);
    }
    out
}

fn coeff_prefix(c: &Coeff, out: &mut String) {
    if *c == Ratio::new(1, 1) {
        return;
    }
    if *c.denom() == 1 {
        let _ = write!(out, "{} ", c.numer());
    } else {
        let _ = write!(out, "{}/{} ", c.numer(), c.denom());
    }
}

/// Renders a term list in the abbreviated notation described in the module
/// docs.
pub fn render_abbrev(list: &TermList) -> String {
    if list.terms.is_empty() {
        return String::from("0");
    }
    let all_theta =
        list.terms.iter().all(|t| matches!(t.sign, SignAssignment::ThetaChannel { .. }));
    if !all_theta {
        return render_flat(list);
    }
    if list.terms.len() == 1 && list.terms[0].factors.is_empty() {
        // The unit kernel (n = 0).
        let mut out = String::new();
        coeff_prefix(&list.terms[0].coeff, &mut out);
        out.push('1');
        return out;
    }

    // Group structures by their (k → coefficient) profile.
    let mut profiles: BTreeMap<Vec<Factor>, Vec<(usize, Coeff)>> = BTreeMap::new();
    for term in &list.terms {
        let k = match term.sign {
            SignAssignment::ThetaChannel { k } => k,
            _ => unreachable!("checked all_theta above"),
        };
        profiles.entry(term.factors.clone()).or_default().push((k, term.coeff));
    }
    let mut groups: BTreeMap<Vec<(usize, Coeff)>, Vec<Vec<Factor>>> = BTreeMap::new();
    for (factors, mut profile) in profiles {
        profile.sort();
        groups.entry(profile).or_default().push(factors);
    }
    // Deterministic group order: largest conjoined block first, then by the
    // first structure.
    let mut ordered: Vec<(Vec<(usize, Coeff)>, Vec<Vec<Factor>>)> = groups.into_iter().collect();
    for (_, structures) in &mut ordered {
        structures.sort();
    }
    ordered.sort_by(|a, b| {
        let block = |structs: &Vec<Vec<Factor>>| {
            structs
                .iter()
                .flat_map(|fs| fs.iter())
                .map(|f| match f {
                    Factor::Conjoined(ix) => ix.len(),
                    Factor::TwoPoint { .. } => 0,
                })
                .max()
                .unwrap_or(0)
        };
        block(&b.1).cmp(&block(&a.1)).then_with(|| a.1.cmp(&b.1))
    });

    let multi_group = ordered.len() > 1;
    let mut segments: Vec<String> = Vec::new();
    for (profile, structures) in &ordered {
        // Split the profile by coefficient so each segment has one prefix.
        let mut by_coeff: BTreeMap<Coeff, Vec<usize>> = BTreeMap::new();
        for &(k, c) in profile {
            by_coeff.entry(c).or_default().push(k);
        }
        for (c, ks) in by_coeff {
            let mut seg = String::new();
            coeff_prefix(&c, &mut seg);
            if structures.len() == 1 {
                seg.push_str(&structure_token(&structures[0]));
            } else {
                let (open, close) = if multi_group { ('{', '}') } else { ('(', ')') };
                seg.push(open);
                for (i, s) in structures.iter().enumerate() {
                    if i > 0 {
                        seg.push('+');
                    }
                    seg.push_str(&structure_token(s));
                }
                seg.push(close);
            }
            seg.push(' ');
            if ks.len() == 1 {
                let _ = write!(seg, "Theta_{{{},{}}}", ks[0], list.n);
            } else {
                seg.push('(');
                for (i, k) in ks.iter().enumerate() {
                    if i > 0 {
                        seg.push('+');
                    }
                    let _ = write!(seg, "Theta_{{{},{}}}", k, list.n);
                }
                seg.push(')');
            }
            segments.push(seg);
        }
    }
    let mut out = String::from("sum_part ");
    for (i, seg) in segments.iter().enumerate() {
        if i > 0 {
            out.push_str(" + ");
        }
        out.push_str(seg);
    }
    out
}

/// Renders unconstrained and fixed-sign lists: structures joined "+", with a
/// sign suffix when a fixed pattern applies.
fn render_flat(list: &TermList) -> String {
    let mut out = String::new();
    let mut fixed: Option<&SignAssignment> = None;
    for (i, term) in list.terms.iter().enumerate() {
        if i > 0 {
            out.push('+');
        }
        coeff_prefix(&term.coeff, &mut out);
        out.push_str(&structure_token(&term.factors));
        if matches!(term.sign, SignAssignment::Fixed(_)) {
            fixed = Some(&term.sign);
        }
    }
    if let Some(SignAssignment::Fixed(pattern)) = fixed {
        out.push_str(" | signs=(");
        for &s in pattern.signs() {
            out.push(if s == -1 { '-' } else { '+' });
        }
        out.push(')');
    }
    out
}

/// Renders a term list as JSON with a stable field order:
/// `{"n":…,"terms":[{"coeff":{"num":…,"den":…},"factors":[…],"sign":…}]}`.
/// Factors render as `{"conjoined":[…]}` or `{"pair":{"neg":…,"pos":…}}`;
/// signs as `null`, `{"theta_k":…}`, or `{"fixed":[…]}`.
pub fn render_json(list: &TermList) -> String {
    let mut out = String::new();
    let _ = write!(out, "{{\"n\":{},\"terms\":[", list.n);
    for (ti, term) in list.terms.iter().enumerate() {
        if ti > 0 {
            out.push(',');
        }
        let _ = write!(
            out,
            "{{\"coeff\":{{\"num\":{},\"den\":{}}},\"factors\":[",
            term.coeff.numer(),
            term.coeff.denom()
        );
        for (fi, factor) in term.factors.iter().enumerate() {
            if fi > 0 {
                out.push(',');
            }
            match factor {
                Factor::Conjoined(ix) => {
                    out.push_str("{\"conjoined\":[");
                    for (i, &v) in ix.iter().enumerate() {
                        if i > 0 {
                            out.push(',');
                        }
                        let _ = write!(out, "{v}");
                    }
                    out.push_str("]}");
                }
                Factor::TwoPoint { neg, pos } => {
                    let _ = write!(out, "{{\"pair\":{{\"neg\":{neg},\"pos\":{pos}}}}}");
                }
            }
        }
        out.push_str("],\"sign\":");
        match &term.sign {
            SignAssignment::None => out.push_str("null"),
            SignAssignment::ThetaChannel { k } => {
                let _ = write!(out, "{{\"theta_k\":{k}}}");
            }
            SignAssignment::Fixed(pattern) => {
                out.push_str("{\"fixed\":[");
                for (i, &s) in pattern.signs().iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    let _ = write!(out, "{s}");
                }
                out.push_str("]}");
            }
        }
        out.push('}');
    }
    out.push_str("]}");
    out
}
