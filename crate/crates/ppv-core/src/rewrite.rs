//! Rewriting a closed equation instance into formulas and terms.
//!
//! A match replaces a subterm alpha-equivalent to the instantiated left-hand
//! side. Matches under a binder that shadows a free variable of either side
//! are skipped (pointwise rewriting under binders goes through the
//! congruence steps instead). Occurrences are numbered in preorder over valid
//! matches; `occs = None` rewrites all of them.

use crate::ast::{CaseArms, Expr, Formula};
use crate::error::{CoreError, Result};
use crate::subst::{alpha_eq_expr, free_vars_expr};
use std::collections::BTreeSet;

pub struct RewriteOut<T> {
    pub result: T,
    pub replaced: usize,
}

struct Rw<'a> {
    lhs: &'a Expr,
    rhs: &'a Expr,
    avoid: BTreeSet<String>,
    occs: Option<&'a [usize]>,
    counter: usize,
    replaced: usize,
}

impl Rw<'_> {
    fn selected(&mut self) -> bool {
        self.counter += 1;
        match self.occs {
            None => true,
            Some(ks) => ks.contains(&(self.counter - 1)),
        }
    }

    fn go(&mut self, e: &Expr, shadow: &mut Vec<String>) -> Expr {
        // A valid match site: alpha-equal to lhs and no shadowed variables.
        if shadow.iter().all(|s| !self.avoid.contains(s)) && alpha_eq_expr(e, self.lhs) {
            if self.selected() {
                self.replaced += 1;
                return self.rhs.clone();
            }
        }
        self.descend(e, shadow)
    }

    fn descend(&mut self, e: &Expr, shadow: &mut Vec<String>) -> Expr {
        let under = |this: &mut Self, names: &[&String], e: &Expr, shadow: &mut Vec<String>| {
            for n in names {
                shadow.push((*n).clone());
            }
            let out = this.go(e, shadow);
            for _ in names {
                shadow.pop();
            }
            out
        };
        match e {
            Expr::Var(_) | Expr::Const(_) | Expr::Lebesgue => e.clone(),
            Expr::Prim(p, args) => {
                Expr::Prim(*p, args.iter().map(|a| self.go(a, shadow)).collect())
            }
            Expr::App(a, b) => Expr::app(self.go(a, shadow), self.go(b, shadow)),
            Expr::Lam(x, t, b) => {
                let b2 = under(self, &[x], b, shadow);
                Expr::Lam(x.clone(), t.clone(), Box::new(b2))
            }
            Expr::Pair(a, b) => Expr::pair(self.go(a, shadow), self.go(b, shadow)),
            Expr::Proj(i, a) => Expr::Proj(*i, Box::new(self.go(a, shadow))),
            Expr::Case(s, arms) => {
                let s2 = self.go(s, shadow);
                let arms2 = match arms {
                    CaseArms::Bool { tt, ff } => CaseArms::Bool {
                        tt: Box::new(self.go(tt, shadow)),
                        ff: Box::new(self.go(ff, shadow)),
                    },
                    CaseArms::List {
                        nil,
                        head,
                        tail,
                        cons,
                    } => CaseArms::List {
                        nil: Box::new(self.go(nil, shadow)),
                        head: head.clone(),
                        tail: tail.clone(),
                        cons: Box::new(under(self, &[head, tail], cons, shadow)),
                    },
                    CaseArms::Pair { fst, snd, body } => CaseArms::Pair {
                        fst: fst.clone(),
                        snd: snd.clone(),
                        body: Box::new(under(self, &[fst, snd], body, shadow)),
                    },
                };
                Expr::Case(Box::new(s2), arms2)
            }
            Expr::Letrec {
                f,
                x,
                dom,
                cod,
                body,
            } => Expr::Letrec {
                f: f.clone(),
                x: x.clone(),
                dom: dom.clone(),
                cod: cod.clone(),
                body: Box::new(under(self, &[f, x], body, shadow)),
            },
            Expr::Ret(a) => Expr::Ret(Box::new(self.go(a, shadow))),
            Expr::Bind(a, b) => Expr::bind(self.go(a, shadow), self.go(b, shadow)),
            Expr::Observe(a, b) => {
                Expr::Observe(Box::new(self.go(a, shadow)), Box::new(self.go(b, shadow)))
            }
            Expr::Uniform(a, b) => {
                Expr::Uniform(Box::new(self.go(a, shadow)), Box::new(self.go(b, shadow)))
            }
            Expr::Bern(a) => Expr::Bern(Box::new(self.go(a, shadow))),
            Expr::Gauss(a, b) => {
                Expr::Gauss(Box::new(self.go(a, shadow)), Box::new(self.go(b, shadow)))
            }
            Expr::Gpdf(a, b) => {
                Expr::Gpdf(Box::new(self.go(a, shadow)), Box::new(self.go(b, shadow)))
            }
            Expr::Expect { binder, src, body } => {
                let src2 = self.go(src, shadow);
                let body2 = under(self, &[binder], body, shadow);
                Expr::Expect {
                    binder: binder.clone(),
                    src: Box::new(src2),
                    body: Box::new(body2),
                }
            }
            Expr::Scale(a, b) => {
                Expr::Scale(Box::new(self.go(a, shadow)), Box::new(self.go(b, shadow)))
            }
            Expr::Normalize(a) => Expr::Normalize(Box::new(self.go(a, shadow))),
            Expr::Ascribe(a, t) => Expr::Ascribe(Box::new(self.go(a, shadow)), t.clone()),
            other => other.clone(),
        }
    }

    fn go_formula(&mut self, f: &Formula, shadow: &mut Vec<String>) -> Formula {
        match f {
            Formula::Eq(a, b) => Formula::Eq(self.go(a, shadow), self.go(b, shadow)),
            Formula::Lt(a, b) => Formula::Lt(self.go(a, shadow), self.go(b, shadow)),
            Formula::Top | Formula::Bot => f.clone(),
            Formula::And(a, b) => Formula::And(
                Box::new(self.go_formula(a, shadow)),
                Box::new(self.go_formula(b, shadow)),
            ),
            Formula::Imp(a, b) => Formula::Imp(
                Box::new(self.go_formula(a, shadow)),
                Box::new(self.go_formula(b, shadow)),
            ),
            Formula::Not(a) => Formula::Not(Box::new(self.go_formula(a, shadow))),
            Formula::Forall(x, t, b) => {
                shadow.push(x.clone());
                let b2 = self.go_formula(b, shadow);
                shadow.pop();
                Formula::Forall(x.clone(), t.clone(), Box::new(b2))
            }
            Formula::Exists(x, t, b) => {
                shadow.push(x.clone());
                let b2 = self.go_formula(b, shadow);
                shadow.pop();
                Formula::Exists(x.clone(), t.clone(), Box::new(b2))
            }
            other => other.clone(),
        }
    }
}

fn make_rw<'a>(lhs: &'a Expr, rhs: &'a Expr, occs: Option<&'a [usize]>) -> Rw<'a> {
    let mut avoid = free_vars_expr(lhs);
    avoid.extend(free_vars_expr(rhs));
    Rw {
        lhs,
        rhs,
        avoid,
        occs,
        counter: 0,
        replaced: 0,
    }
}

pub fn rewrite_formula(
    target: &Formula,
    lhs: &Expr,
    rhs: &Expr,
    occs: Option<&[usize]>,
) -> Result<RewriteOut<Formula>> {
    let mut rw = make_rw(lhs, rhs, occs);
    let result = rw.go_formula(target, &mut Vec::new());
    if rw.replaced == 0 {
        return Err(CoreError::Rewrite(format!(
            "no occurrence of `{}` found",
            crate::printer::print_expr(lhs)
        )));
    }
    Ok(RewriteOut {
        result,
        replaced: rw.replaced,
    })
}

pub fn rewrite_expr(
    target: &Expr,
    lhs: &Expr,
    rhs: &Expr,
    occs: Option<&[usize]>,
) -> Result<RewriteOut<Expr>> {
    let mut rw = make_rw(lhs, rhs, occs);
    let result = rw.go(target, &mut Vec::new());
    if rw.replaced == 0 {
        return Err(CoreError::Rewrite(format!(
            "no occurrence of `{}` found",
            crate::printer::print_expr(lhs)
        )));
    }
    Ok(RewriteOut {
        result,
        replaced: rw.replaced,
    })
}

/// Map term normalization over a formula.
pub fn normalize_formula(f: &Formula) -> Result<Formula> {
    Ok(match f {
        Formula::Eq(a, b) => Formula::Eq(crate::conv::normalize(a)?, crate::conv::normalize(b)?),
        Formula::Lt(a, b) => Formula::Lt(crate::conv::normalize(a)?, crate::conv::normalize(b)?),
        Formula::Top | Formula::Bot => f.clone(),
        Formula::And(a, b) => Formula::and(normalize_formula(a)?, normalize_formula(b)?),
        Formula::Imp(a, b) => Formula::imp(normalize_formula(a)?, normalize_formula(b)?),
        Formula::Not(a) => Formula::not(normalize_formula(a)?),
        Formula::Forall(x, t, b) => {
            Formula::Forall(x.clone(), t.clone(), Box::new(normalize_formula(b)?))
        }
        Formula::Exists(x, t, b) => {
            Formula::Exists(x.clone(), t.clone(), Box::new(normalize_formula(b)?))
        }
        other => {
            return Err(CoreError::Rewrite(format!(
                "normalization of macro formula `{}`",
                crate::printer::print_formula(other)
            )))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_expr_str, parse_formula_str};
    use crate::printer::print_formula;

    #[test]
    fn rewrite_all_and_selected() {
        let target = parse_formula_str("a + a = 2 * a").unwrap();
        let lhs = parse_expr_str("a").unwrap();
        let rhs = parse_expr_str("b").unwrap();
        let all = rewrite_formula(&target, &lhs, &rhs, None).unwrap();
        assert_eq!(all.replaced, 3);
        assert_eq!(print_formula(&all.result), "b + b = 2 * b");
        let one = rewrite_formula(&target, &lhs, &rhs, Some(&[1])).unwrap();
        assert_eq!(print_formula(&one.result), "a + b = 2 * a");
    }

    #[test]
    fn shadowed_matches_skipped() {
        // fun x -> x + c: the context `x` in the equation must not match the
        // bound x.
        let target = parse_formula_str("E[x ~ d](x + c) = z").unwrap();
        let lhs = parse_expr_str("x + c").unwrap();
        let rhs = parse_expr_str("x * 2").unwrap();
        assert!(rewrite_formula(&target, &lhs, &rhs, None).is_err());
        // but a closed match under the binder is fine
        let lhs2 = parse_expr_str("c").unwrap();
        let rhs2 = parse_expr_str("9").unwrap();
        let out = rewrite_formula(&target, &lhs2, &rhs2, None).unwrap();
        assert_eq!(print_formula(&out.result), "E[x ~ d](x + 9) = z");
    }

    #[test]
    fn replacement_is_not_revisited() {
        let target = parse_formula_str("a = 0").unwrap();
        let lhs = parse_expr_str("a").unwrap();
        let rhs = parse_expr_str("a + 1").unwrap();
        let out = rewrite_formula(&target, &lhs, &rhs, None).unwrap();
        assert_eq!(out.replaced, 1);
        assert_eq!(print_formula(&out.result), "a + 1 = 0");
    }
}
