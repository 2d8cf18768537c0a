//! Grading monoids and lifting parameters for the graded lifting layer, plus
//! the definitional expansion of lifted assertions used by desugaring.

use crate::ast::{Context, Expr, Formula, Judgment, Name, R, R1, R2, RV, RV1, RV2};
use crate::error::{CoreError, Result};
use crate::subst::{fresh_name, free_vars_formula, subst_formula_many};
use crate::types::TypeTerm;
use std::collections::{BTreeMap, BTreeSet};

/// Built-in preordered grading monoids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradeMonoid {
    /// `(preal, 0, +, <=)`.
    PRealAdd,
    /// The trivial monoid on `unit`.
    UnitTrivial,
}

impl GradeMonoid {
    pub fn by_name(name: &str) -> Option<GradeMonoid> {
        match name {
            "preal_add" => Some(GradeMonoid::PRealAdd),
            "unit_trivial" => Some(GradeMonoid::UnitTrivial),
            _ => None,
        }
    }

    pub fn carrier(self) -> TypeTerm {
        match self {
            GradeMonoid::PRealAdd => TypeTerm::PReal,
            GradeMonoid::UnitTrivial => TypeTerm::Unit,
        }
    }

    pub fn unit(self) -> Expr {
        match self {
            GradeMonoid::PRealAdd => Expr::zero(),
            GradeMonoid::UnitTrivial => Expr::Const(crate::ast::Const::Unit),
        }
    }

    pub fn comp(self, a: Expr, b: Expr) -> Expr {
        match self {
            GradeMonoid::PRealAdd => Expr::prim(crate::ast::Prim::Add, vec![a, b]),
            GradeMonoid::UnitTrivial => Expr::Const(crate::ast::Const::Unit),
        }
    }

    /// The preorder as a core formula.
    pub fn le(self, a: Expr, b: Expr) -> Formula {
        match self {
            GradeMonoid::PRealAdd => Formula::le(a, b),
            GradeMonoid::UnitTrivial => Formula::Top,
        }
    }
}

/// Distinguished free variables of a lifting parameter's test formula.
pub const GRADE_VAR: &str = "k";
pub const TEST_VAR: &str = "l";
pub const TEST_VAR1: &str = "l1";
pub const TEST_VAR2: &str = "l2";

#[derive(Debug, Clone)]
pub enum LiftKind {
    Unary { obs_ty: TypeTerm },
    Relational { obs_ty1: TypeTerm, obs_ty2: TypeTerm },
}

/// A lifting parameter: a test formula `S` over the grade variable `k` and the
/// observation measure(s) `l` (or `l1`, `l2`), monotone in `k`.
#[derive(Debug, Clone)]
pub struct LiftParam {
    pub name: Name,
    pub monoid: GradeMonoid,
    pub kind: LiftKind,
    /// Core (macro-free) formula over `k` and `l`/`l1`,`l2`.
    pub test: Formula,
}

impl LiftParam {
    /// The monotonicity condition the parameter must satisfy before use.
    pub fn monotonicity_obligation(&self) -> Judgment {
        let zeta = self.monoid.carrier();
        let mut ctx = Context::new();
        ctx.push_var(GRADE_VAR, zeta.clone());
        match &self.kind {
            LiftKind::Unary { obs_ty } => {
                ctx.push_var(TEST_VAR, TypeTerm::subprob(obs_ty.clone()))
            }
            LiftKind::Relational { obs_ty1, obs_ty2 } => {
                ctx.push_var(TEST_VAR1, TypeTerm::subprob(obs_ty1.clone()));
                ctx.push_var(TEST_VAR2, TypeTerm::subprob(obs_ty2.clone()));
            }
        }
        let a = "mono_a";
        let b = "mono_b";
        let s_a = subst_formula_many(
            &self.test,
            &one_subst(GRADE_VAR, Expr::var(a)),
        );
        let s_b = subst_formula_many(
            &self.test,
            &one_subst(GRADE_VAR, Expr::var(b)),
        );
        let goal = Formula::forall(
            a,
            zeta.clone(),
            Formula::forall(
                b,
                zeta.clone(),
                Formula::imp(
                    self.monoid.le(Expr::var(a), Expr::var(b)),
                    Formula::imp(s_a, s_b),
                ),
            ),
        );
        Judgment::Pl { ctx, goal }
    }
}

fn one_subst(x: &str, e: Expr) -> BTreeMap<Name, Expr> {
    let mut m = BTreeMap::new();
    m.insert(x.to_string(), e);
    m
}

/// Registry of lifting parameters available to the macro expander.
#[derive(Debug, Clone)]
pub struct MacroEnv {
    params: BTreeMap<Name, LiftParam>,
}

impl Default for MacroEnv {
    fn default() -> Self {
        let mut env = MacroEnv {
            params: BTreeMap::new(),
        };
        // Union-bound parameter: S = (E[y ~ l](1) <= k) over (preal, 0, +, <=).
        env.params.insert(
            "S_ub".to_string(),
            LiftParam {
                name: "S_ub".to_string(),
                monoid: GradeMonoid::PRealAdd,
                kind: LiftKind::Unary {
                    obs_ty: TypeTerm::Unit,
                },
                test: Formula::le(
                    Expr::expect("y", Expr::var(TEST_VAR), Expr::one()),
                    Expr::var(GRADE_VAR),
                ),
            },
        );
        // Coupling parameter: S = (E[y ~ l1](1) <= E[y ~ l2](1)), trivial monoid.
        env.params.insert(
            "S_cpl".to_string(),
            LiftParam {
                name: "S_cpl".to_string(),
                monoid: GradeMonoid::UnitTrivial,
                kind: LiftKind::Relational {
                    obs_ty1: TypeTerm::Unit,
                    obs_ty2: TypeTerm::Unit,
                },
                test: Formula::le(
                    Expr::expect("y", Expr::var(TEST_VAR1), Expr::one()),
                    Expr::expect("y", Expr::var(TEST_VAR2), Expr::one()),
                ),
            },
        );
        env
    }
}

impl MacroEnv {
    pub fn get(&self, name: &str) -> Result<&LiftParam> {
        self.params
            .get(name)
            .ok_or_else(|| CoreError::Desugar(format!("unknown lifting parameter '{name}'")))
    }

    pub fn register(&mut self, p: LiftParam) {
        self.params.insert(p.name.clone(), p);
    }

    pub fn names(&self) -> impl Iterator<Item = &Name> {
        self.params.keys()
    }
}

/// Unary lifting: for `phi` over `r'` at subject type `tau`, produce the
/// quantified test formula over the distinguished `r : D[tau]`.
pub fn expand_unary(p: &LiftParam, grade: &Expr, val_ty: &TypeTerm, phi: &Formula) -> Result<Formula> {
    let obs_ty = match &p.kind {
        LiftKind::Unary { obs_ty } => obs_ty.clone(),
        LiftKind::Relational { .. } => {
            return Err(CoreError::Desugar(format!(
                "lifting parameter '{}' is relational, used in a unary lift",
                p.name
            )))
        }
    };
    let mut avoid: BTreeSet<Name> = free_vars_formula(phi);
    avoid.extend(crate::subst::free_vars_expr(grade));
    avoid.extend(free_vars_formula(&p.test));
    let beta = fresh_name("beta", &avoid);
    avoid.insert(beta.clone());
    let fvar = fresh_name("f", &avoid);
    avoid.insert(fvar.clone());
    let x = fresh_name("x", &avoid);

    let phi_x = subst_formula_many(phi, &one_subst(RV, Expr::var(&x)));
    let s_pointwise = subst_formula_many(&p.test, &{
        let mut m = one_subst(GRADE_VAR, Expr::var(&beta));
        m.insert(
            TEST_VAR.to_string(),
            Expr::app(Expr::var(&fvar), Expr::var(&x)),
        );
        m
    });
    let s_bound = subst_formula_many(&p.test, &{
        let mut m = one_subst(
            GRADE_VAR,
            p.monoid.comp(grade.clone(), Expr::var(&beta)),
        );
        m.insert(
            TEST_VAR.to_string(),
            Expr::bind(Expr::var(R), Expr::var(&fvar)),
        );
        m
    });
    Ok(Formula::forall(
        &beta,
        p.monoid.carrier(),
        Formula::forall(
            &fvar,
            TypeTerm::arrow(val_ty.clone(), TypeTerm::subprob(obs_ty)),
            Formula::imp(
                Formula::forall(&x, val_ty.clone(), Formula::imp(phi_x, s_pointwise)),
                s_bound,
            ),
        ),
    ))
}

/// Relational lifting over `r1 : D[tau1]`, `r2 : D[tau2]`.
pub fn expand_rel(
    p: &LiftParam,
    grade: &Expr,
    val_ty1: &TypeTerm,
    val_ty2: &TypeTerm,
    phi: &Formula,
) -> Result<Formula> {
    let (obs1, obs2) = match &p.kind {
        LiftKind::Relational { obs_ty1, obs_ty2 } => (obs_ty1.clone(), obs_ty2.clone()),
        LiftKind::Unary { .. } => {
            return Err(CoreError::Desugar(format!(
                "lifting parameter '{}' is unary, used in a relational lift",
                p.name
            )))
        }
    };
    let mut avoid: BTreeSet<Name> = free_vars_formula(phi);
    avoid.extend(crate::subst::free_vars_expr(grade));
    avoid.extend(free_vars_formula(&p.test));
    let beta = fresh_name("beta", &avoid);
    avoid.insert(beta.clone());
    let f1 = fresh_name("f1", &avoid);
    avoid.insert(f1.clone());
    let f2 = fresh_name("f2", &avoid);
    avoid.insert(f2.clone());
    let x1 = fresh_name("x1", &avoid);
    avoid.insert(x1.clone());
    let x2 = fresh_name("x2", &avoid);

    let phi_xx = subst_formula_many(phi, &{
        let mut m = one_subst(RV1, Expr::var(&x1));
        m.insert(RV2.to_string(), Expr::var(&x2));
        m
    });
    let s_pointwise = subst_formula_many(&p.test, &{
        let mut m = one_subst(GRADE_VAR, Expr::var(&beta));
        m.insert(
            TEST_VAR1.to_string(),
            Expr::app(Expr::var(&f1), Expr::var(&x1)),
        );
        m.insert(
            TEST_VAR2.to_string(),
            Expr::app(Expr::var(&f2), Expr::var(&x2)),
        );
        m
    });
    let s_bound = subst_formula_many(&p.test, &{
        let mut m = one_subst(
            GRADE_VAR,
            p.monoid.comp(grade.clone(), Expr::var(&beta)),
        );
        m.insert(
            TEST_VAR1.to_string(),
            Expr::bind(Expr::var(R1), Expr::var(&f1)),
        );
        m.insert(
            TEST_VAR2.to_string(),
            Expr::bind(Expr::var(R2), Expr::var(&f2)),
        );
        m
    });
    Ok(Formula::forall(
        &beta,
        p.monoid.carrier(),
        Formula::forall(
            &f1,
            TypeTerm::arrow(val_ty1.clone(), TypeTerm::subprob(obs1)),
            Formula::forall(
                &f2,
                TypeTerm::arrow(val_ty2.clone(), TypeTerm::subprob(obs2)),
                Formula::imp(
                    Formula::forall(
                        &x1,
                        val_ty1.clone(),
                        Formula::forall(&x2, val_ty2.clone(), Formula::imp(phi_xx, s_pointwise)),
                    ),
                    s_bound,
                ),
            ),
        ),
    ))
}
