//! The axiom-schema table: statistics equalities over measures (commutativity,
//! linearity, variable transformation, rescaling, observation, normalization),
//! the subprobability axioms, inequality schemas (expectation monotonicity,
//! Cauchy-Schwarz), definitional axioms for the Gaussian primitives and the
//! divergence functional, and the ordered-field theory used for symbolic
//! arithmetic. A schema application takes explicit term/type bindings and
//! yields a conclusion formula plus side-condition obligations.

use crate::ast::{Const, Context, Expr, Formula, Prim};
use crate::error::{CoreError, Result};
use crate::subst::{free_vars_expr, fresh_name};
use crate::typecheck::infer_expr;
use crate::types::TypeTerm;
use std::collections::{BTreeMap, BTreeSet};

pub struct SchemaInstance {
    pub conclusion: Formula,
    pub conditions: Vec<Formula>,
}

pub struct Bindings<'a> {
    pub terms: &'a BTreeMap<String, Expr>,
    pub types: &'a BTreeMap<String, TypeTerm>,
}

impl Bindings<'_> {
    fn term(&self, k: &str) -> Result<Expr> {
        self.terms
            .get(k)
            .cloned()
            .ok_or_else(|| CoreError::Rewrite(format!("missing term binding '{k}'")))
    }
    fn ty(&self, k: &str) -> Result<TypeTerm> {
        self.types
            .get(k)
            .cloned()
            .ok_or_else(|| CoreError::Rewrite(format!("missing type binding '{k}'")))
    }
}

fn fresh_avoiding(base: &str, exprs: &[&Expr]) -> String {
    let mut avoid = BTreeSet::new();
    for e in exprs {
        avoid.extend(free_vars_expr(e));
    }
    fresh_name(base, &avoid)
}

/// Apply a unary function binding to a variable, beta-reducing when it is a
/// literal lambda.
fn app1(f: &Expr, x: Expr) -> Expr {
    match f {
        Expr::Lam(b, _, body) => crate::subst::subst_expr(body, b, &x),
        _ => Expr::app(f.clone(), x),
    }
}

fn app2(f: &Expr, x: Expr, y: Expr) -> Expr {
    match app1(f, x) {
        Expr::Lam(b, _, body) => crate::subst::subst_expr(&body, &b, &y),
        g => Expr::app(g, y),
    }
}

fn expect(x: &str, src: Expr, body: Expr) -> Expr {
    Expr::expect(x, src, body)
}

fn mass(src: Expr) -> Expr {
    Expr::expect("mass_y", src, Expr::one())
}

fn mul(a: Expr, b: Expr) -> Expr {
    Expr::prim(Prim::Mul, vec![a, b])
}
fn add(a: Expr, b: Expr) -> Expr {
    Expr::prim(Prim::Add, vec![a, b])
}
fn lam(x: &str, t: TypeTerm, b: Expr) -> Expr {
    Expr::Lam(x.to_string(), t, Box::new(b))
}
fn hole() -> TypeTerm {
    TypeTerm::Hole
}
fn inf() -> Expr {
    Expr::Const(Const::Infinity)
}

/// The product-measure term `bind a (fun x -> bind b (fun y -> return <x,y>))`.
fn tensor(a: Expr, b: Expr) -> Expr {
    let x = fresh_avoiding("ta", &[&a, &b]);
    let y = {
        let mut avoid: BTreeSet<String> = free_vars_expr(&a);
        avoid.extend(free_vars_expr(&b));
        avoid.insert(x.clone());
        fresh_name("tb", &avoid)
    };
    Expr::bind(
        a,
        lam(
            &x,
            hole(),
            Expr::bind(
                b,
                lam(&y, hole(), Expr::ret(Expr::pair(Expr::var(&x), Expr::var(&y)))),
            ),
        ),
    )
}

/// Real-valued expectation as its positive/negative-part expansion.
fn er(x: &str, src: Expr, body: Expr) -> Expr {
    let part = |cmp: Prim, b: &Expr| {
        Expr::if_then_else(
            Expr::prim(cmp, vec![b.clone(), Expr::zero()]),
            Expr::prim(
                Prim::RealToPReal,
                vec![Expr::prim(Prim::Abs, vec![b.clone()])],
            ),
            Expr::zero(),
        )
    };
    Expr::prim(
        Prim::PSub,
        vec![
            expect(x, src.clone(), part(Prim::Gt, &body)),
            expect(x, src, part(Prim::Lt, &body)),
        ],
    )
}

fn eq(a: Expr, b: Expr) -> Formula {
    Formula::eq(a, b)
}
fn le(a: Expr, b: Expr) -> Formula {
    Formula::le(a, b)
}
fn lt(a: Expr, b: Expr) -> Formula {
    Formula::lt(a, b)
}

fn plain(conclusion: Formula) -> SchemaInstance {
    SchemaInstance {
        conclusion,
        conditions: Vec::new(),
    }
}

fn with(conclusion: Formula, conditions: Vec<Formula>) -> SchemaInstance {
    SchemaInstance {
        conclusion,
        conditions,
    }
}

pub fn schema_names() -> Vec<&'static str> {
    vec![
        "bind_comm",
        "expect_mono",
        "expect_nonneg",
        "expect_zero",
        "cauchy_schwarz",
        "linearity_scalar",
        "linearity_add",
        "var_transform",
        "expect_scale",
        "er_linearity_scalar",
        "er_linearity_add",
        "er_indep_product",
        "er_nonneg_bridge",
        "er_nonneg",
        "scale_fuse",
        "scale_one",
        "scale_bind",
        "scale_product",
        "bind_const_mass",
        "observe_def",
        "normalize_def",
        "normalize_scale_invariant",
        "dunit_repr",
        "dunit_mass_bounds",
        "gauss_def_lebesgue",
        "gauss_reproductive",
        "gauss_standardize",
        "kl_density_def",
        "eq_refl",
        "lt_irrefl",
        "lt_trans",
        "le_trans",
        "lt_le_trans",
        "le_lt_trans",
        "lt_neq",
        "add_lt_compat",
        "add_le_compat",
        "mul_le_compat",
        "mul_pos",
        "add_pos",
        "div_pos",
        "div_lt_inf",
        "preal_nonneg",
        "preal_pos",
        "preal_finite",
        "preal_mono_le",
        "div_le_compat",
        "abs_nonneg",
        "abs_of_nonneg",
        "abs_triangle",
        "sq_nonneg",
        "min_eq_left",
        "min_le_left",
        "lt_le",
        "int_discrete",
        "mul_lt_compat",
        "abs_mul",
        "preal_div",
        "preal_add_cancel",
        "preal_add_le_cancel",
        "div_antitone",
        "true_ne_false",
        "reflect_lt",
        "reflect_le",
        "reflect_lt_false",
        "reflect_le_false",
        "reflect_not",
        "reflect_and",
        "reflect_or",
        "exp_pos",
        "if_branch_le",
    ]
}

/// Instantiate the named schema under the given context.
pub fn instantiate(
    ctx: &Context,
    name: &str,
    b: &Bindings<'_>,
) -> Result<SchemaInstance> {
    match name {
        // ---- commutativity (product measures integrate in either order) ----
        "bind_comm" => {
            let (m1, m2, k) = (b.term("m1")?, b.term("m2")?, b.term("k")?);
            let x = fresh_avoiding("cx", &[&m1, &m2, &k]);
            let y = {
                let mut avoid: BTreeSet<_> = free_vars_expr(&m1);
                avoid.extend(free_vars_expr(&m2));
                avoid.extend(free_vars_expr(&k));
                avoid.insert(x.clone());
                fresh_name("cy", &avoid)
            };
            let body = app2(&k, Expr::var(&x), Expr::var(&y));
            let lhs = Expr::bind(
                m1.clone(),
                lam(&x, hole(), Expr::bind(m2.clone(), lam(&y, hole(), Expr::Ret(Box::new(body.clone()))))),
            );
            let rhs = Expr::bind(
                m2,
                lam(&y, hole(), Expr::bind(m1, lam(&x, hole(), Expr::Ret(Box::new(body))))),
            );
            Ok(plain(eq(lhs, rhs)))
        }

        // ---- expectation ----
        "expect_mono" => {
            let (d, f, g) = (b.term("d")?, b.term("f")?, b.term("g")?);
            let tau = b.ty("ty")?;
            let x = fresh_avoiding("mx", &[&d, &f, &g]);
            let hyp = Formula::forall(
                &x,
                tau,
                le(app1(&f, Expr::var(&x)), app1(&g, Expr::var(&x))),
            );
            let xl = fresh_avoiding("ex", &[&d, &f, &g]);
            let concl = le(
                expect(&xl, d.clone(), app1(&f, Expr::var(&xl))),
                expect(&xl, d, app1(&g, Expr::var(&xl))),
            );
            Ok(plain(Formula::imp(hyp, concl)))
        }
        "expect_nonneg" => {
            let (d, f) = (b.term("d")?, b.term("f")?);
            let x = fresh_avoiding("ex", &[&d, &f]);
            Ok(plain(le(
                Expr::zero(),
                expect(&x, d, app1(&f, Expr::var(&x))),
            )))
        }
        "cauchy_schwarz" => {
            let (d, f, g) = (b.term("d")?, b.term("f")?, b.term("g")?);
            let x = fresh_avoiding("cs", &[&d, &f, &g]);
            let exy = expect(
                &x,
                d.clone(),
                mul(app1(&f, Expr::var(&x)), app1(&g, Expr::var(&x))),
            );
            let ex2 = expect(
                &x,
                d.clone(),
                mul(app1(&f, Expr::var(&x)), app1(&f, Expr::var(&x))),
            );
            let ey2 = expect(
                &x,
                d,
                mul(app1(&g, Expr::var(&x)), app1(&g, Expr::var(&x))),
            );
            Ok(plain(le(mul(exy.clone(), exy), mul(ex2, ey2))))
        }
        "linearity_scalar" => {
            let (d, c, f) = (b.term("d")?, b.term("c")?, b.term("f")?);
            let x = fresh_avoiding("lx", &[&d, &c, &f]);
            Ok(plain(eq(
                expect(&x, d.clone(), mul(c.clone(), app1(&f, Expr::var(&x)))),
                mul(c, expect(&x, d, app1(&f, Expr::var(&x)))),
            )))
        }
        "linearity_add" => {
            let (d, f, g) = (b.term("d")?, b.term("f")?, b.term("g")?);
            let x = fresh_avoiding("lx", &[&d, &f, &g]);
            Ok(plain(eq(
                expect(
                    &x,
                    d.clone(),
                    add(app1(&f, Expr::var(&x)), app1(&g, Expr::var(&x))),
                ),
                add(
                    expect(&x, d.clone(), app1(&f, Expr::var(&x))),
                    expect(&x, d, app1(&g, Expr::var(&x))),
                ),
            )))
        }
        "var_transform" => {
            // E[x ~ bind d (fun y -> return (g y))](f x) = E[y ~ d](f (g y))
            let (d, g, f) = (b.term("d")?, b.term("g")?, b.term("f")?);
            let y = fresh_avoiding("vy", &[&d, &g, &f]);
            let x = {
                let mut avoid: BTreeSet<_> = free_vars_expr(&d);
                avoid.extend(free_vars_expr(&g));
                avoid.extend(free_vars_expr(&f));
                avoid.insert(y.clone());
                fresh_name("vx", &avoid)
            };
            let lhs = expect(
                &x,
                Expr::bind(
                    d.clone(),
                    lam(&y, hole(), Expr::Ret(Box::new(app1(&g, Expr::var(&y))))),
                ),
                app1(&f, Expr::var(&x)),
            );
            let rhs = expect(&y, d, app1(&f, app1(&g, Expr::var(&y))));
            Ok(plain(eq(lhs, rhs)))
        }
        "expect_scale" => {
            // E[x ~ scale(d, g)](f x) = E[x ~ d](f x * g x)
            let (d, g, f) = (b.term("d")?, b.term("g")?, b.term("f")?);
            let x = fresh_avoiding("sx", &[&d, &g, &f]);
            Ok(plain(eq(
                expect(
                    &x,
                    Expr::Scale(Box::new(d.clone()), Box::new(g.clone())),
                    app1(&f, Expr::var(&x)),
                ),
                expect(
                    &x,
                    d,
                    mul(app1(&f, Expr::var(&x)), app1(&g, Expr::var(&x))),
                ),
            )))
        }

        // ---- real-valued expectation composites ----
        "er_linearity_scalar" => {
            let (d, c, f) = (b.term("d")?, b.term("c")?, b.term("f")?);
            let x = fresh_avoiding("lx", &[&d, &c, &f]);
            Ok(plain(eq(
                er(&x, d.clone(), mul(c.clone(), app1(&f, Expr::var(&x)))),
                mul(c, er(&x, d, app1(&f, Expr::var(&x)))),
            )))
        }
        "er_linearity_add" => {
            let (d, f, g) = (b.term("d")?, b.term("f")?, b.term("g")?);
            let x = fresh_avoiding("lx", &[&d, &f, &g]);
            Ok(plain(eq(
                er(
                    &x,
                    d.clone(),
                    add(app1(&f, Expr::var(&x)), app1(&g, Expr::var(&x))),
                ),
                add(
                    er(&x, d.clone(), app1(&f, Expr::var(&x))),
                    er(&x, d, app1(&g, Expr::var(&x))),
                ),
            )))
        }
        "er_indep_product" => {
            // Er[w ~ d1 (x) d2](f (pi1 w) * g (pi2 w)) = Er[d1](f) * Er[d2](g)
            let (d1, d2, f, g) = (b.term("d1")?, b.term("d2")?, b.term("f")?, b.term("g")?);
            let w = fresh_avoiding("iw", &[&d1, &d2, &f, &g]);
            let lhs = er(
                &w,
                tensor(d1.clone(), d2.clone()),
                mul(
                    app1(&f, Expr::proj(1, Expr::var(&w))),
                    app1(&g, Expr::proj(2, Expr::var(&w))),
                ),
            );
            let a = fresh_avoiding("ia", &[&d1, &f]);
            let c = fresh_avoiding("ic", &[&d2, &g]);
            let rhs = mul(
                er(&a, d1, app1(&f, Expr::var(&a))),
                er(&c, d2, app1(&g, Expr::var(&c))),
            );
            Ok(plain(eq(lhs, rhs)))
        }

        // ---- rescaling / observation / normalization ----
        "scale_fuse" => {
            let (e1, e2, e3) = (b.term("e1")?, b.term("e2")?, b.term("e3")?);
            let x = fresh_avoiding("fx", &[&e1, &e2, &e3]);
            Ok(plain(eq(
                Expr::Scale(
                    Box::new(Expr::Scale(Box::new(e1.clone()), Box::new(e2.clone()))),
                    Box::new(e3.clone()),
                ),
                Expr::Scale(
                    Box::new(e1),
                    Box::new(lam(
                        &x,
                        hole(),
                        mul(app1(&e2, Expr::var(&x)), app1(&e3, Expr::var(&x))),
                    )),
                ),
            )))
        }
        "scale_one" => {
            let e = b.term("e")?;
            let u = fresh_avoiding("u", &[&e]);
            Ok(plain(eq(
                e.clone(),
                Expr::Scale(Box::new(e), Box::new(lam(&u, hole(), Expr::one()))),
            )))
        }
        "scale_bind" => {
            // bind (scale(e1, e2)) k = bind e1 (fun x -> scale(k x, fun u -> e2 x))
            let (e1, e2, k) = (b.term("e1")?, b.term("e2")?, b.term("k")?);
            let x = fresh_avoiding("sx", &[&e1, &e2, &k]);
            let u = {
                let mut avoid: BTreeSet<_> = free_vars_expr(&e2);
                avoid.insert(x.clone());
                fresh_name("su", &avoid)
            };
            Ok(plain(eq(
                Expr::bind(
                    Expr::Scale(Box::new(e1.clone()), Box::new(e2.clone())),
                    k.clone(),
                ),
                Expr::bind(
                    e1,
                    lam(
                        &x,
                        hole(),
                        Expr::Scale(
                            Box::new(app1(&k, Expr::var(&x))),
                            Box::new(lam(&u, hole(), app1(&e2, Expr::var(&x)))),
                        ),
                    ),
                ),
            )))
        }
        "scale_product" => {
            // scale(e1,f) (x) scale(e2,g) = scale(e1 (x) e2, fun w -> f(pi1 w)*g(pi2 w))
            let (e1, f, e2, g) = (b.term("e1")?, b.term("f")?, b.term("e2")?, b.term("g")?);
            let w = fresh_avoiding("pw", &[&e1, &f, &e2, &g]);
            Ok(plain(eq(
                tensor(
                    Expr::Scale(Box::new(e1.clone()), Box::new(f.clone())),
                    Expr::Scale(Box::new(e2.clone()), Box::new(g.clone())),
                ),
                Expr::Scale(
                    Box::new(tensor(e1, e2)),
                    Box::new(lam(
                        &w,
                        hole(),
                        mul(
                            app1(&f, Expr::proj(1, Expr::var(&w))),
                            app1(&g, Expr::proj(2, Expr::var(&w))),
                        ),
                    )),
                ),
            )))
        }
        "bind_const_mass" => {
            // bind e' (fun x -> e) = scale(e, fun u -> E[y ~ e'](1)),  x not in e;
            // mass-finiteness of the body is a side condition.
            let (ep, e) = (b.term("ep")?, b.term("e")?);
            let x = fresh_avoiding("bx", &[&ep, &e]);
            let u = fresh_avoiding("bu", &[&ep, &e]);
            Ok(with(
                eq(
                    Expr::bind(ep.clone(), lam(&x, hole(), e.clone())),
                    Expr::Scale(
                        Box::new(e.clone()),
                        Box::new(lam(&u, hole(), mass(ep))),
                    ),
                ),
                vec![lt(mass(e), inf())],
            ))
        }
        "observe_def" => {
            let (e1, e2) = (b.term("e1")?, b.term("e2")?);
            Ok(plain(eq(
                Expr::Observe(Box::new(e1.clone()), Box::new(e2.clone())),
                Expr::Normalize(Box::new(Expr::Scale(Box::new(e1), Box::new(e2)))),
            )))
        }
        "normalize_def" => {
            let e = b.term("e")?;
            let u = fresh_avoiding("nu", &[&e]);
            Ok(plain(eq(
                Expr::Normalize(Box::new(e.clone())),
                Expr::Scale(
                    Box::new(e.clone()),
                    Box::new(lam(
                        &u,
                        hole(),
                        Expr::prim(Prim::Div, vec![Expr::one(), mass(e)]),
                    )),
                ),
            )))
        }
        "normalize_scale_invariant" => {
            let (e1, e2, c) = (b.term("e1")?, b.term("e2")?, b.term("c")?);
            let x = fresh_avoiding("nx", &[&e1, &e2, &c]);
            Ok(with(
                eq(
                    Expr::Normalize(Box::new(Expr::Scale(
                        Box::new(e1.clone()),
                        Box::new(e2.clone()),
                    ))),
                    Expr::Normalize(Box::new(Expr::Scale(
                        Box::new(e1),
                        Box::new(lam(
                            &x,
                            hole(),
                            mul(c.clone(), app1(&e2, Expr::var(&x))),
                        )),
                    ))),
                ),
                vec![lt(Expr::zero(), c.clone()), lt(c, inf())],
            ))
        }

        // ---- subprobability axioms ----
        "dunit_repr" => {
            let e = b.term("e")?;
            let (t, _) = infer_expr(ctx, &e)?;
            if t != TypeTerm::subprob(TypeTerm::Unit) {
                return Err(CoreError::Rewrite(format!(
                    "dunit_repr needs e : D[unit], found `{t}`"
                )));
            }
            let z = fresh_avoiding("z", &[&e]);
            Ok(plain(eq(
                e.clone(),
                Expr::Scale(
                    Box::new(Expr::Ret(Box::new(Expr::Const(Const::Unit)))),
                    Box::new(lam(&z, TypeTerm::Unit, mass(e))),
                ),
            )))
        }
        "dunit_mass_bounds" => {
            let e = b.term("e")?;
            let (t, _) = infer_expr(ctx, &e)?;
            if !matches!(t, TypeTerm::SubProb(_)) {
                return Err(CoreError::Rewrite(format!(
                    "dunit_mass_bounds needs a subprobability, found `{t}`"
                )));
            }
            Ok(plain(Formula::and(
                le(Expr::zero(), mass(e.clone())),
                le(mass(e), Expr::one()),
            )))
        }

        // ---- Gaussian definitional axioms ----
        "gauss_def_lebesgue" => {
            // Gauss(m, v) = normalize(scale(Lebesgue, GPDF(m, v))), 0 < v < inf
            let (m, v) = (b.term("m")?, b.term("v")?);
            Ok(with(
                eq(
                    Expr::Gauss(Box::new(m.clone()), Box::new(v.clone())),
                    Expr::Normalize(Box::new(Expr::Scale(
                        Box::new(Expr::Lebesgue),
                        Box::new(Expr::Gpdf(Box::new(m), Box::new(v.clone()))),
                    ))),
                ),
                vec![lt(Expr::zero(), v.clone()), lt(v, inf())],
            ))
        }
        "gauss_reproductive" => {
            // bind Gauss(m1,v1) (fun x -> bind Gauss(m2,v2) (fun y ->
            //   return (p*x + (1-p)*y))) = Gauss(p*m1+(1-p)*m2, p^2 v1 + (1-p)^2 v2)
            let (m1, v1, m2, v2, p) = (
                b.term("m1")?,
                b.term("v1")?,
                b.term("m2")?,
                b.term("v2")?,
                b.term("p")?,
            );
            let x = fresh_avoiding("gx", &[&m1, &v1, &m2, &v2, &p]);
            let y = {
                let mut avoid: BTreeSet<_> = free_vars_expr(&p);
                avoid.insert(x.clone());
                fresh_name("gy", &avoid)
            };
            let onem = Expr::prim(Prim::Sub, vec![Expr::one(), p.clone()]);
            let mix = add(
                mul(p.clone(), Expr::var(&x)),
                mul(onem.clone(), Expr::var(&y)),
            );
            let lhs = Expr::bind(
                Expr::Gauss(Box::new(m1.clone()), Box::new(v1.clone())),
                lam(
                    &x,
                    hole(),
                    Expr::bind(
                        Expr::Gauss(Box::new(m2.clone()), Box::new(v2.clone())),
                        lam(&y, hole(), Expr::Ret(Box::new(mix))),
                    ),
                ),
            );
            let mean = add(mul(p.clone(), m1), mul(onem.clone(), m2));
            let var = Expr::prim(
                Prim::RealToPReal,
                vec![add(
                    mul(
                        mul(p.clone(), p.clone()),
                        Expr::prim(Prim::PSub, vec![v1.clone(), Expr::zero()]),
                    ),
                    mul(
                        mul(onem.clone(), onem),
                        Expr::prim(Prim::PSub, vec![v2.clone(), Expr::zero()]),
                    ),
                )],
            );
            let rhs = Expr::Gauss(Box::new(mean), Box::new(var));
            Ok(with(
                eq(lhs, rhs),
                vec![
                    le(Expr::zero(), p.clone()),
                    le(p, Expr::one()),
                    lt(v1, inf()),
                    lt(v2, inf()),
                ],
            ))
        }
        "gauss_standardize" => {
            // bind Gauss(0,1) (fun x -> return (x * sqrt(v) + m)) = Gauss(m, v)
            let (m, v) = (b.term("m")?, b.term("v")?);
            let x = fresh_avoiding("gx", &[&m, &v]);
            let scaled = add(
                mul(
                    Expr::var(&x),
                    Expr::prim(
                        Prim::Sqrt,
                        vec![Expr::prim(Prim::PSub, vec![v.clone(), Expr::zero()])],
                    ),
                ),
                m.clone(),
            );
            Ok(with(
                eq(
                    Expr::bind(
                        Expr::Gauss(Box::new(Expr::zero()), Box::new(Expr::one())),
                        lam(&x, hole(), Expr::Ret(Box::new(scaled))),
                    ),
                    Expr::Gauss(Box::new(m), Box::new(v.clone())),
                ),
                vec![lt(v, inf())],
            ))
        }
        "kl_density_def" => {
            let (d1, d2, f) = (b.term("d1")?, b.term("d2")?, b.term("f")?);
            let x = fresh_avoiding("kx", &[&d1, &d2, &f]);
            Ok(plain(Formula::imp(
                eq(
                    d1.clone(),
                    Expr::Scale(Box::new(d2.clone()), Box::new(f.clone())),
                ),
                eq(
                    Expr::prim(Prim::Kl, vec![d1.clone(), d2]),
                    er(
                        &x,
                        d1,
                        Expr::prim(Prim::Log, vec![app1(&f, Expr::var(&x))]),
                    ),
                ),
            )))
        }

        // ---- ordered-field theory ----
        "eq_refl" => {
            let a = b.term("a")?;
            Ok(plain(eq(a.clone(), a)))
        }
        "lt_irrefl" => {
            let a = b.term("a")?;
            Ok(plain(Formula::not(lt(a.clone(), a))))
        }
        "lt_trans" => trans_schema(b, true, true),
        "le_trans" => trans_schema(b, false, false),
        "lt_le_trans" => trans_schema(b, true, false),
        "le_lt_trans" => trans_schema(b, false, true),
        "lt_neq" => {
            let (a, c) = (b.term("a")?, b.term("b")?);
            Ok(plain(Formula::imp(
                lt(a.clone(), c.clone()),
                Formula::and(
                    Formula::not(Formula::eq(a.clone(), c.clone())),
                    Formula::not(Formula::eq(c, a)),
                ),
            )))
        }
        "add_lt_compat" => {
            let (a, c, d) = (b.term("a")?, b.term("b")?, b.term("c")?);
            Ok(plain(Formula::imp(
                lt(a.clone(), c.clone()),
                lt(add(a, d.clone()), add(c, d)),
            )))
        }
        "add_le_compat" => {
            let (a, c, d, e) = (b.term("a")?, b.term("b")?, b.term("c")?, b.term("d")?);
            Ok(plain(Formula::imp(
                Formula::and(le(a.clone(), c.clone()), le(d.clone(), e.clone())),
                le(add(a, d), add(c, e)),
            )))
        }
        "mul_le_compat" => {
            // on preal: a <= b  =>  c*a <= c*b; on real additionally 0 <= c.
            let (a, c, d) = (b.term("a")?, b.term("b")?, b.term("c")?);
            let (t, _) = infer_expr(ctx, &d)?;
            let mut conds = Vec::new();
            if t != TypeTerm::PReal {
                conds.push(le(Expr::zero(), d.clone()));
            }
            Ok(with(
                Formula::imp(
                    le(a.clone(), c.clone()),
                    le(mul(d.clone(), a), mul(d, c)),
                ),
                conds,
            ))
        }
        "mul_pos" => {
            let (a, c) = (b.term("a")?, b.term("b")?);
            Ok(plain(Formula::imp(
                Formula::and(lt(Expr::zero(), a.clone()), lt(Expr::zero(), c.clone())),
                lt(Expr::zero(), mul(a, c)),
            )))
        }
        "add_pos" => {
            let (a, c) = (b.term("a")?, b.term("b")?);
            Ok(plain(Formula::imp(
                Formula::and(lt(Expr::zero(), a.clone()), lt(Expr::zero(), c.clone())),
                lt(Expr::zero(), add(a, c)),
            )))
        }
        "div_pos" => {
            // Positivity of a quotient; on preal the divisor must be finite.
            let (a, c) = (b.term("a")?, b.term("b")?);
            let (t, _) = infer_expr(ctx, &c)?;
            let denom_cond = if t == TypeTerm::PReal {
                Formula::and(lt(Expr::zero(), c.clone()), lt(c.clone(), inf()))
            } else {
                lt(Expr::zero(), c.clone())
            };
            Ok(plain(Formula::imp(
                Formula::and(lt(Expr::zero(), a.clone()), denom_cond),
                lt(Expr::zero(), Expr::prim(Prim::Div, vec![a, c])),
            )))
        }
        "div_lt_inf" => {
            let (a, c) = (b.term("a")?, b.term("b")?);
            Ok(plain(Formula::imp(
                Formula::and(lt(a.clone(), inf()), lt(Expr::zero(), c.clone())),
                lt(Expr::prim(Prim::Div, vec![a, c]), inf()),
            )))
        }
        "preal_nonneg" => {
            let a = b.term("a")?;
            let (t, _) = infer_expr(ctx, &a)?;
            if t != TypeTerm::PReal {
                return Err(CoreError::Rewrite(format!(
                    "preal_nonneg needs a preal term, found `{t}`"
                )));
            }
            Ok(plain(le(Expr::zero(), a)))
        }
        "preal_pos" => {
            let a = b.term("a")?;
            Ok(plain(Formula::imp(
                lt(Expr::zero(), a.clone()),
                lt(Expr::zero(), Expr::prim(Prim::RealToPReal, vec![a])),
            )))
        }
        "preal_finite" => {
            let a = b.term("a")?;
            Ok(plain(lt(Expr::prim(Prim::RealToPReal, vec![a]), inf())))
        }
        "preal_mono_le" => {
            let (a, c) = (b.term("a")?, b.term("b")?);
            Ok(plain(Formula::imp(
                le(a.clone(), c.clone()),
                le(
                    Expr::prim(Prim::RealToPReal, vec![a]),
                    Expr::prim(Prim::RealToPReal, vec![c]),
                ),
            )))
        }
        "div_le_compat" => {
            // a <= b  =>  a/c <= b/c; unconditional on preal, 0 < c on real.
            let (a, c, d) = (b.term("a")?, b.term("b")?, b.term("c")?);
            let (t, _) = infer_expr(ctx, &d)?;
            let mut conds = Vec::new();
            if t != TypeTerm::PReal {
                conds.push(lt(Expr::zero(), d.clone()));
            }
            Ok(with(
                Formula::imp(
                    le(a.clone(), c.clone()),
                    le(
                        Expr::prim(Prim::Div, vec![a, d.clone()]),
                        Expr::prim(Prim::Div, vec![c, d]),
                    ),
                ),
                conds,
            ))
        }
        "abs_nonneg" => {
            let a = b.term("a")?;
            Ok(plain(le(Expr::zero(), Expr::prim(Prim::Abs, vec![a]))))
        }
        "abs_of_nonneg" => {
            let a = b.term("a")?;
            Ok(plain(Formula::imp(
                le(Expr::zero(), a.clone()),
                eq(Expr::prim(Prim::Abs, vec![a.clone()]), a),
            )))
        }
        "abs_triangle" => {
            let (a, c) = (b.term("a")?, b.term("b")?);
            Ok(plain(le(
                Expr::prim(Prim::Abs, vec![add(a.clone(), c.clone())]),
                add(
                    Expr::prim(Prim::Abs, vec![a]),
                    Expr::prim(Prim::Abs, vec![c]),
                ),
            )))
        }
        "sq_nonneg" => {
            let a = b.term("a")?;
            Ok(plain(le(Expr::zero(), mul(a.clone(), a))))
        }
        "min_eq_left" => {
            let (a, c) = (b.term("a")?, b.term("b")?);
            Ok(plain(Formula::imp(
                le(a.clone(), c.clone()),
                eq(Expr::prim(Prim::Min, vec![a.clone(), c]), a),
            )))
        }
        "min_le_left" => {
            let (a, c) = (b.term("a")?, b.term("b")?);
            Ok(plain(le(Expr::prim(Prim::Min, vec![a.clone(), c]), a)))
        }
        "true_ne_false" => Ok(plain(Formula::not(eq(
            Expr::Const(Const::Bool(true)),
            Expr::Const(Const::Bool(false)),
        )))),
        "exp_pos" => {
            let a = b.term("a")?;
            Ok(plain(lt(
                Expr::zero(),
                Expr::prim(Prim::Exp, vec![a]),
            )))
        }
        "if_branch_le" => {
            // (if c then a else b) <= max-like bound via the two branches:
            // (a <= u) /\ (b <= u) => (if c then a else b) <= u
            let (cnd, a, b2, u) = (
                b.term("c")?,
                b.term("a")?,
                b.term("b")?,
                b.term("u")?,
            );
            Ok(plain(Formula::imp(
                Formula::and(le(a.clone(), u.clone()), le(b2.clone(), u.clone())),
                le(Expr::if_then_else(cnd, a, b2), u),
            )))
        }

        // ---- reflection between bool comparisons and formula atoms ----
        "reflect_lt" => reflect_cmp(b, Prim::Lt, true),
        "reflect_le" => reflect_cmp(b, Prim::Le, true),
        "reflect_lt_false" => reflect_cmp(b, Prim::Lt, false),
        "reflect_le_false" => reflect_cmp(b, Prim::Le, false),
        "reflect_not" => {
            let a = b.term("a")?;
            let t = Expr::Const(Const::Bool(true));
            let f = Expr::Const(Const::Bool(false));
            let lhs = eq(Expr::prim(Prim::Not, vec![a.clone()]), t.clone());
            let rhs = eq(a, f);
            Ok(plain(Formula::and(
                Formula::imp(lhs.clone(), rhs.clone()),
                Formula::imp(rhs, lhs),
            )))
        }
        "reflect_and" => {
            let (a, c) = (b.term("a")?, b.term("b")?);
            let t = Expr::Const(Const::Bool(true));
            let both = eq(Expr::prim(Prim::And, vec![a.clone(), c.clone()]), t.clone());
            let split = Formula::and(eq(a, t.clone()), eq(c, t));
            Ok(plain(Formula::and(
                Formula::imp(both.clone(), split.clone()),
                Formula::imp(split, both),
            )))
        }
        "reflect_or" => {
            // ((a || b) = false  <=>  a = false /\ b = false), both directions.
            let (a, c) = (b.term("a")?, b.term("b")?);
            let f = Expr::Const(Const::Bool(false));
            let both = eq(Expr::prim(Prim::Or, vec![a.clone(), c.clone()]), f.clone());
            let split = Formula::and(eq(a, f.clone()), eq(c, f));
            Ok(plain(Formula::and(
                Formula::imp(both.clone(), split.clone()),
                Formula::imp(split, both),
            )))
        }
        "expect_zero" => {
            let d = b.term("d")?;
            let x = fresh_avoiding("zx", &[&d]);
            Ok(plain(eq(expect(&x, d, Expr::zero()), Expr::zero())))
        }
        "er_nonneg_bridge" => {
            // (forall x. 0 <= f x) => E[preal o f] < inf =>
            //   preal(Er[f]) = E[x ~ d](preal(f x))
            let (d, f) = (b.term("d")?, b.term("f")?);
            let tau = b.ty("ty")?;
            let x = fresh_avoiding("bx", &[&d, &f]);
            let pos = Formula::forall(
                &x,
                tau,
                le(Expr::zero(), app1(&f, Expr::var(&x))),
            );
            let e_preal = expect(
                &x,
                d.clone(),
                Expr::prim(Prim::RealToPReal, vec![app1(&f, Expr::var(&x))]),
            );
            let bridge = eq(
                Expr::prim(
                    Prim::RealToPReal,
                    vec![er(&x, d.clone(), app1(&f, Expr::var(&x)))],
                ),
                e_preal.clone(),
            );
            Ok(plain(Formula::imp(
                pos,
                Formula::imp(lt(e_preal, inf()), bridge),
            )))
        }
        "er_nonneg" => {
            let (d, f) = (b.term("d")?, b.term("f")?);
            let tau = b.ty("ty")?;
            let x = fresh_avoiding("bx", &[&d, &f]);
            let pos = Formula::forall(
                &x,
                tau,
                le(Expr::zero(), app1(&f, Expr::var(&x))),
            );
            let e_preal = expect(
                &x,
                d.clone(),
                Expr::prim(Prim::RealToPReal, vec![app1(&f, Expr::var(&x))]),
            );
            Ok(plain(Formula::imp(
                pos,
                Formula::imp(
                    lt(e_preal, inf()),
                    le(Expr::zero(), er(&x, d, app1(&f, Expr::var(&x)))),
                ),
            )))
        }
        "lt_le" => {
            let (a, c) = (b.term("a")?, b.term("b")?);
            Ok(plain(Formula::imp(lt(a.clone(), c.clone()), le(a, c))))
        }
        "int_discrete" => {
            // On int, a < b implies a + 1 <= b.
            let (a, c) = (b.term("a")?, b.term("b")?);
            let (t, _) = infer_expr(ctx, &a)?;
            if t != TypeTerm::Int {
                return Err(CoreError::Rewrite("int_discrete needs int operands".into()));
            }
            Ok(plain(Formula::imp(
                lt(a.clone(), c.clone()),
                le(add(a, Expr::one()), c),
            )))
        }
        "mul_lt_compat" => {
            // (a < b /\ 0 < c) => c*a < c*b  (int/real/preal with finite c)
            let (a, c, d) = (b.term("a")?, b.term("b")?, b.term("c")?);
            let (t, _) = infer_expr(ctx, &d)?;
            let mut conds = vec![];
            if t == TypeTerm::PReal {
                conds.push(lt(d.clone(), inf()));
            }
            Ok(with(
                Formula::imp(
                    Formula::and(lt(a.clone(), c.clone()), lt(Expr::zero(), d.clone())),
                    lt(mul(d.clone(), a), mul(d, c)),
                ),
                conds,
            ))
        }
        "preal_add_cancel" => {
            // c < inf => a + c = b + c => a = b   (on preal)
            let (a, c, d) = (b.term("a")?, b.term("b")?, b.term("c")?);
            Ok(plain(Formula::imp(
                lt(d.clone(), inf()),
                Formula::imp(
                    eq(add(a.clone(), d.clone()), add(c.clone(), d)),
                    eq(a, c),
                ),
            )))
        }
        "preal_add_le_cancel" => {
            // c < inf => a + c <= b + c => a <= b   (on preal)
            let (a, c, d) = (b.term("a")?, b.term("b")?, b.term("c")?);
            Ok(plain(Formula::imp(
                lt(d.clone(), inf()),
                Formula::imp(
                    le(add(a.clone(), d.clone()), add(c.clone(), d)),
                    le(a, c),
                ),
            )))
        }
        "div_antitone" => {
            // a <= b => c / b <= c / a   (on preal)
            let (a, c, d) = (b.term("a")?, b.term("b")?, b.term("c")?);
            Ok(plain(Formula::imp(
                le(a.clone(), c.clone()),
                le(
                    Expr::prim(Prim::Div, vec![d.clone(), c]),
                    Expr::prim(Prim::Div, vec![d, a]),
                ),
            )))
        }
        "abs_mul" => {
            let (a, c) = (b.term("a")?, b.term("b")?);
            Ok(plain(eq(
                Expr::prim(Prim::Abs, vec![mul(a.clone(), c.clone())]),
                mul(
                    Expr::prim(Prim::Abs, vec![a]),
                    Expr::prim(Prim::Abs, vec![c]),
                ),
            )))
        }
        "preal_div" => {
            // (0 <= a /\ 0 < b) => preal(a / b) = preal(a) / preal(b)
            let (a, c) = (b.term("a")?, b.term("b")?);
            Ok(plain(Formula::imp(
                Formula::and(le(Expr::zero(), a.clone()), lt(Expr::zero(), c.clone())),
                eq(
                    Expr::prim(Prim::RealToPReal, vec![Expr::prim(Prim::Div, vec![a.clone(), c.clone()])]),
                    Expr::prim(
                        Prim::Div,
                        vec![
                            Expr::prim(Prim::RealToPReal, vec![a]),
                            Expr::prim(Prim::RealToPReal, vec![c]),
                        ],
                    ),
                ),
            )))
        }
        other => Err(CoreError::Rewrite(format!("unknown schema '{other}'"))),
    }
}

fn trans_schema(b: &Bindings<'_>, first_strict: bool, second_strict: bool) -> Result<SchemaInstance> {
    let (a, c, d) = (b.term("a")?, b.term("b")?, b.term("c")?);
    let h1 = if first_strict {
        lt(a.clone(), c.clone())
    } else {
        le(a.clone(), c.clone())
    };
    let h2 = if second_strict {
        lt(c.clone(), d.clone())
    } else {
        le(c, d.clone())
    };
    let concl = if first_strict || second_strict {
        lt(a, d)
    } else {
        le(a, d)
    };
    Ok(plain(Formula::imp(Formula::and(h1, h2), concl)))
}

/// `(a OP b) = true <=> a OP b` (polarity true), or the classical flip
/// `(a < b) = false <=> b <= a` and `(a <= b) = false <=> b < a` (polarity
/// false), each as a conjunction of the two implications.
fn reflect_cmp(b: &Bindings<'_>, op: Prim, polarity: bool) -> Result<SchemaInstance> {
    let (a, c) = (b.term("a")?, b.term("b")?);
    let boolside = eq(
        Expr::prim(op, vec![a.clone(), c.clone()]),
        Expr::Const(Const::Bool(polarity)),
    );
    let formside = match (op, polarity) {
        (Prim::Lt, true) => lt(a, c),
        (Prim::Le, true) => le(a, c),
        (Prim::Lt, false) => le(c, a),
        (Prim::Le, false) => lt(c, a),
        _ => unreachable!(),
    };
    Ok(plain(Formula::and(
        Formula::imp(boolside.clone(), formside.clone()),
        Formula::imp(formside, boolside),
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_expr_str;
    use crate::printer::print_formula;

    fn inst(name: &str, terms: &[(&str, &str)]) -> SchemaInstance {
        let m: BTreeMap<String, Expr> = terms
            .iter()
            .map(|(k, v)| (k.to_string(), parse_expr_str(v).unwrap()))
            .collect();
        let tys = BTreeMap::new();
        instantiate(
            &Context::new(),
            name,
            &Bindings {
                terms: &m,
                types: &tys,
            },
        )
        .unwrap()
    }

    #[test]
    fn scale_fuse_shape() {
        let s = inst("scale_fuse", &[("e1", "d"), ("e2", "g"), ("e3", "h")]);
        let txt = print_formula(&s.conclusion);
        assert!(txt.contains("scale(scale(d, g), h) = scale(d,"), "{txt}");
        assert!(s.conditions.is_empty());
    }

    #[test]
    fn bind_const_mass_condition_is_on_the_body() {
        let s = inst("bind_const_mass", &[("ep", "d1"), ("e", "d2")]);
        let cond = print_formula(&s.conditions[0]);
        assert!(cond.contains("E[mass_y ~ d2](1) < inf"), "{cond}");
    }

    #[test]
    fn var_transform_beta_reduces_bindings() {
        let s = inst(
            "var_transform",
            &[
                ("d", "d0"),
                ("g", "fun y : real -> y + 1"),
                ("f", "fun x : real -> preal(abs(x))"),
            ],
        );
        let txt = print_formula(&s.conclusion);
        assert!(txt.contains("E[vy ~ d0](preal(abs(vy + 1)))"), "{txt}");
    }

    #[test]
    fn all_names_resolve() {
        // every listed schema instantiates given generous bindings
        let mut terms = BTreeMap::new();
        for k in [
            "a", "b", "c", "d", "e", "u", "f", "g", "k", "m", "v", "p", "m1", "m2", "v1", "v2",
            "e1", "e2", "e3", "ep", "d1", "d2",
        ] {
            terms.insert(k.to_string(), Expr::var(&format!("{k}0")));
        }
        let mut tys = BTreeMap::new();
        tys.insert("ty".to_string(), TypeTerm::Real);
        let mut ctx = Context::new();
        for k in ["a0", "b0", "c0", "d0", "u0"] {
            ctx.push_var(k, TypeTerm::PReal);
        }
        ctx.push_var("e0", TypeTerm::subprob(TypeTerm::Unit));
        for name in schema_names() {
            let r = instantiate(
                &ctx,
                name,
                &Bindings {
                    terms: &terms,
                    types: &tys,
                },
            );
            assert!(r.is_ok(), "schema {name}: {:?}", r.err());
        }
    }
}
