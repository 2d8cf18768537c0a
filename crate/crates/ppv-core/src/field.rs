//! Deterministic equality of arithmetic terms by normalization to a canonical
//! rational-function form over opaque atoms, in the spirit of field
//! simplification tactics.
//!
//! Soundness: both sides are brought to fractions of multivariate polynomials
//! with exact rational coefficients; the step claims `lhs = rhs` only when the
//! cross product of the fractions is the identical polynomial, and emits one
//! nonzero (or finite-positive, on preal) obligation per syntactic
//! denominator. On preal sorts, subtraction and negation are out of fragment
//! and all coefficients stay nonnegative, so the identity is valid in the
//! `[0, inf]` semiring with the `0 * inf = 0` convention.

use crate::ast::{Expr, Formula, Prim};
use crate::error::{CoreError, Result};
use crate::types::TypeTerm;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;

/// Sort the equation is proved at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NumSort {
    IntOrReal,
    PReal,
}

type Monomial = BTreeMap<String, u32>;

#[derive(Debug, Clone, PartialEq, Eq)]
struct Poly {
    terms: BTreeMap<Monomial, BigRational>,
}

impl Poly {
    fn constant(c: BigRational) -> Poly {
        let mut t = BTreeMap::new();
        if !c.is_zero() {
            t.insert(Monomial::new(), c);
        }
        Poly { terms: t }
    }
    fn atom(key: String) -> Poly {
        let mut m = Monomial::new();
        m.insert(key, 1);
        let mut t = BTreeMap::new();
        t.insert(m, BigRational::one());
        Poly { terms: t }
    }
    fn add(&self, other: &Poly) -> Poly {
        let mut t = self.terms.clone();
        for (m, c) in &other.terms {
            let e = t.entry(m.clone()).or_insert_with(BigRational::zero);
            *e += c;
            if e.is_zero() {
                t.remove(m);
            }
        }
        Poly { terms: t }
    }
    fn neg(&self) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), -c.clone()))
                .collect(),
        }
    }
    fn mul(&self, other: &Poly) -> Poly {
        let mut t: BTreeMap<Monomial, BigRational> = BTreeMap::new();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                let mut m = m1.clone();
                for (a, p) in m2 {
                    *m.entry(a.clone()).or_insert(0) += p;
                }
                let e = t.entry(m).or_insert_with(BigRational::zero);
                *e += c1 * c2;
                if e.is_zero() {
                    let key = {
                        let mut m = m1.clone();
                        for (a, p) in m2 {
                            *m.entry(a.clone()).or_insert(0) += p;
                        }
                        m
                    };
                    t.remove(&key);
                }
            }
        }
        t.retain(|_, c| !c.is_zero());
        Poly { terms: t }
    }
    fn one() -> Poly {
        Poly::constant(BigRational::one())
    }
    fn has_negative_coeff(&self) -> bool {
        self.terms.values().any(|c| c.is_negative())
    }
}

struct Frac {
    num: Poly,
    den: Poly,
}

/// Alpha-invariant canonical key for an opaque atom.
pub fn canon_key(e: &Expr) -> String {
    let mut counter = 0usize;
    let renamed = canon_rename(e, &mut counter, &BTreeMap::new());
    crate::printer::print_expr(&renamed)
}

fn canon_rename(e: &Expr, counter: &mut usize, env: &BTreeMap<String, String>) -> Expr {
    use crate::ast::CaseArms;
    let fresh = |counter: &mut usize| {
        let n = format!("_b{counter}");
        *counter += 1;
        n
    };
    let sub = |e: &Expr, counter: &mut usize, env: &BTreeMap<String, String>| {
        canon_rename(e, counter, env)
    };
    match e {
        Expr::Var(x) => Expr::Var(env.get(x).cloned().unwrap_or_else(|| x.clone())),
        Expr::Const(_) | Expr::Lebesgue => e.clone(),
        Expr::Prim(p, args) => Expr::Prim(
            *p,
            args.iter().map(|a| sub(a, counter, env)).collect(),
        ),
        Expr::App(a, b) => Expr::app(sub(a, counter, env), sub(b, counter, env)),
        Expr::Lam(x, t, b) => {
            let nx = fresh(counter);
            let mut env2 = env.clone();
            env2.insert(x.clone(), nx.clone());
            Expr::Lam(nx, t.clone(), Box::new(sub(b, counter, &env2)))
        }
        Expr::Pair(a, b) => Expr::pair(sub(a, counter, env), sub(b, counter, env)),
        Expr::Proj(i, a) => Expr::Proj(*i, Box::new(sub(a, counter, env))),
        Expr::Case(s, arms) => {
            let s2 = sub(s, counter, env);
            let arms2 = match arms {
                CaseArms::Bool { tt, ff } => CaseArms::Bool {
                    tt: Box::new(sub(tt, counter, env)),
                    ff: Box::new(sub(ff, counter, env)),
                },
                CaseArms::List {
                    nil,
                    head,
                    tail,
                    cons,
                } => {
                    let nil2 = sub(nil, counter, env);
                    let nh = fresh(counter);
                    let nt = fresh(counter);
                    let mut env2 = env.clone();
                    env2.insert(head.clone(), nh.clone());
                    env2.insert(tail.clone(), nt.clone());
                    CaseArms::List {
                        nil: Box::new(nil2),
                        head: nh,
                        tail: nt,
                        cons: Box::new(sub(cons, counter, &env2)),
                    }
                }
                CaseArms::Pair { fst, snd, body } => {
                    let nf = fresh(counter);
                    let ns = fresh(counter);
                    let mut env2 = env.clone();
                    env2.insert(fst.clone(), nf.clone());
                    env2.insert(snd.clone(), ns.clone());
                    CaseArms::Pair {
                        fst: nf,
                        snd: ns,
                        body: Box::new(sub(body, counter, &env2)),
                    }
                }
            };
            Expr::Case(Box::new(s2), arms2)
        }
        Expr::Letrec {
            f,
            x,
            dom,
            cod,
            body,
        } => {
            let nf2 = fresh(counter);
            let nx = fresh(counter);
            let mut env2 = env.clone();
            env2.insert(f.clone(), nf2.clone());
            env2.insert(x.clone(), nx.clone());
            Expr::Letrec {
                f: nf2,
                x: nx,
                dom: dom.clone(),
                cod: cod.clone(),
                body: Box::new(sub(body, counter, &env2)),
            }
        }
        Expr::Ret(a) => Expr::Ret(Box::new(sub(a, counter, env))),
        Expr::Bind(a, b) => Expr::bind(sub(a, counter, env), sub(b, counter, env)),
        Expr::Observe(a, b) => {
            Expr::Observe(Box::new(sub(a, counter, env)), Box::new(sub(b, counter, env)))
        }
        Expr::Uniform(a, b) => {
            Expr::Uniform(Box::new(sub(a, counter, env)), Box::new(sub(b, counter, env)))
        }
        Expr::Bern(a) => Expr::Bern(Box::new(sub(a, counter, env))),
        Expr::Gauss(a, b) => {
            Expr::Gauss(Box::new(sub(a, counter, env)), Box::new(sub(b, counter, env)))
        }
        Expr::Gpdf(a, b) => {
            Expr::Gpdf(Box::new(sub(a, counter, env)), Box::new(sub(b, counter, env)))
        }
        Expr::Expect { binder, src, body } => {
            let src2 = sub(src, counter, env);
            let nb = fresh(counter);
            let mut env2 = env.clone();
            env2.insert(binder.clone(), nb.clone());
            Expr::Expect {
                binder: nb,
                src: Box::new(src2),
                body: Box::new(sub(body, counter, &env2)),
            }
        }
        Expr::Scale(a, b) => {
            Expr::Scale(Box::new(sub(a, counter, env)), Box::new(sub(b, counter, env)))
        }
        Expr::Normalize(a) => Expr::Normalize(Box::new(sub(a, counter, env))),
        Expr::Ascribe(a, _) => sub(a, counter, env),
        other => other.clone(),
    }
}

struct Builder {
    sort: NumSort,
    /// Syntactic denominators, deduplicated by canonical key.
    obligations: Vec<Expr>,
    seen: BTreeMap<String, ()>,
}

impl Builder {
    fn to_frac(&mut self, e: &Expr) -> Result<Frac> {
        match e {
            Expr::Const(crate::ast::Const::Rat(r)) => {
                if self.sort == NumSort::PReal && r.is_negative() {
                    return Err(CoreError::Rewrite(
                        "negative literal in a preal equation".into(),
                    ));
                }
                Ok(Frac {
                    num: Poly::constant(r.clone()),
                    den: Poly::one(),
                })
            }
            Expr::Const(crate::ast::Const::Infinity) => Err(CoreError::Rewrite(
                "infinity is out of the field fragment".into(),
            )),
            Expr::Prim(Prim::Add, args) => {
                let a = self.to_frac(&args[0])?;
                let b = self.to_frac(&args[1])?;
                Ok(Frac {
                    num: a.num.mul(&b.den).add(&b.num.mul(&a.den)),
                    den: a.den.mul(&b.den),
                })
            }
            Expr::Prim(Prim::Sub, args) => {
                if self.sort == NumSort::PReal {
                    return Err(CoreError::Rewrite(
                        "subtraction out of fragment on preal".into(),
                    ));
                }
                let a = self.to_frac(&args[0])?;
                let b = self.to_frac(&args[1])?;
                Ok(Frac {
                    num: a.num.mul(&b.den).add(&b.num.mul(&a.den).neg()),
                    den: a.den.mul(&b.den),
                })
            }
            Expr::Prim(Prim::Neg, args) => {
                if self.sort == NumSort::PReal {
                    return Err(CoreError::Rewrite(
                        "negation out of fragment on preal".into(),
                    ));
                }
                let a = self.to_frac(&args[0])?;
                Ok(Frac {
                    num: a.num.neg(),
                    den: a.den,
                })
            }
            Expr::Prim(Prim::Mul, args) => {
                let a = self.to_frac(&args[0])?;
                let b = self.to_frac(&args[1])?;
                Ok(Frac {
                    num: a.num.mul(&b.num),
                    den: a.den.mul(&b.den),
                })
            }
            Expr::Prim(Prim::Div, args) => {
                let a = self.to_frac(&args[0])?;
                let b = self.to_frac(&args[1])?;
                self.note_denominator(&args[1]);
                Ok(Frac {
                    num: a.num.mul(&b.den),
                    den: a.den.mul(&b.num),
                })
            }
            Expr::Ascribe(a, _) => self.to_frac(a),
            // int2real over a compound stays opaque only if conversion left it
            // that way; it is value-preserving, so unwrap literals.
            other => Ok(Frac {
                num: Poly::atom(canon_key(other)),
                den: Poly::one(),
            }),
        }
    }

    fn note_denominator(&mut self, d: &Expr) {
        let key = canon_key(d);
        if self.seen.insert(key, ()).is_none() {
            self.obligations.push(d.clone());
        }
    }
}

pub struct FieldOutcome {
    /// Obligations to discharge, one per distinct denominator.
    pub obligations: Vec<Formula>,
}

/// Decide `lhs = rhs` over the given sort. `Ok(Some(..))` lists obligations;
/// `Ok(None)` means the normal forms differ (not provable by this step).
pub fn field_eq(lhs: &Expr, rhs: &Expr, sort: NumSort) -> Result<Option<FieldOutcome>> {
    let mut b = Builder {
        sort,
        obligations: Vec::new(),
        seen: BTreeMap::new(),
    };
    let fl = b.to_frac(lhs)?;
    let fr = b.to_frac(rhs)?;
    let cross1 = fl.num.mul(&fr.den);
    let cross2 = fr.num.mul(&fl.den);
    if cross1 != cross2 {
        return Ok(None);
    }
    if sort == NumSort::PReal
        && (fl.num.has_negative_coeff()
            || fl.den.has_negative_coeff()
            || fr.num.has_negative_coeff()
            || fr.den.has_negative_coeff())
    {
        return Err(CoreError::Rewrite(
            "negative coefficient in a preal equation".into(),
        ));
    }
    let obligations = b
        .obligations
        .into_iter()
        .map(|d| match sort {
            NumSort::IntOrReal => Formula::not(Formula::eq(d, Expr::zero())),
            NumSort::PReal => Formula::and(
                Formula::lt(Expr::zero(), d.clone()),
                Formula::lt(d, Expr::Const(crate::ast::Const::Infinity)),
            ),
        })
        .collect();
    Ok(Some(FieldOutcome { obligations }))
}

/// Pick the field sort for a typechecked equation from the operand type.
pub fn sort_of_type(t: &TypeTerm) -> Option<NumSort> {
    match t {
        TypeTerm::Int | TypeTerm::Real => Some(NumSort::IntOrReal),
        TypeTerm::PReal => Some(NumSort::PReal),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_expr_str;

    fn check(lhs: &str, rhs: &str, sort: NumSort) -> Option<usize> {
        let l = parse_expr_str(lhs).unwrap();
        let r = parse_expr_str(rhs).unwrap();
        field_eq(&l, &r, sort)
            .unwrap()
            .map(|o| o.obligations.len())
    }

    #[test]
    fn ring_identities() {
        assert_eq!(
            check("(a + b) * (a + b)", "a * a + 2 * a * b + b * b", NumSort::IntOrReal),
            Some(0)
        );
        assert_eq!(check("a - a", "0", NumSort::IntOrReal), Some(0));
        assert_eq!(check("a * (b + c)", "a * b + a * c", NumSort::IntOrReal), Some(0));
        assert_eq!(check("a + b", "a * b", NumSort::IntOrReal), None);
    }

    #[test]
    fn division_obligations() {
        // the variance recursion step of the sample-mean analysis
        let n = check(
            "1 / (i * i) * s + (i - 1) * (i - 1) / (i * i) * (s / (i - 1))",
            "s / i",
            NumSort::IntOrReal,
        );
        // denominators: i*i, i-1, i
        assert_eq!(n, Some(3));
    }

    #[test]
    fn preal_restrictions() {
        assert_eq!(check("a * (b + c)", "a * b + a * c", NumSort::PReal), Some(0));
        assert!(field_eq(
            &parse_expr_str("a - b").unwrap(),
            &parse_expr_str("0").unwrap(),
            NumSort::PReal
        )
        .is_err());
        // division on preal carries finite-positive obligations
        assert_eq!(check("a / k * k", "a", NumSort::PReal), Some(1));
    }

    #[test]
    fn atoms_are_alpha_invariant() {
        assert_eq!(
            check("E[x ~ d](x) + 0", "E[y ~ d](y)", NumSort::PReal),
            Some(0)
        );
    }
}
