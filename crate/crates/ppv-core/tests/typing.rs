//! Typing over the worked examples: conditioning programs, enriched terms,
//! termination, and the negative cases that must stay rejected.

use ppv_core::ast::Context;
use ppv_core::desugar::{desugar_expr, desugar_formula};
use ppv_core::liftings::MacroEnv;
use ppv_core::parser::{parse_expr_str, parse_formula_str, parse_type_str};
use ppv_core::typecheck::{check_formula_wf, infer_expr};
use ppv_core::types::TypeTerm;

fn infer(ctx: &Context, src: &str) -> Result<TypeTerm, String> {
    let e = parse_expr_str(src).map_err(|e| e.to_string())?;
    let d = desugar_expr(&e, &MacroEnv::default()).map_err(|e| e.to_string())?;
    infer_expr(ctx, &d)
        .map(|(t, _)| t)
        .map_err(|e| e.to_string())
}

fn ctx_of(pairs: &[(&str, &str)]) -> Context {
    let mut c = Context::new();
    for (x, t) in pairs {
        c.push_var(x, parse_type_str(t).unwrap());
    }
    c
}

#[test]
fn return_zero_is_m_int() {
    let t = infer(&Context::new(), "return 0").unwrap();
    assert_eq!(t.to_string(), "M[int]");
}

#[test]
fn observed_product_of_uniforms() {
    let t = infer(
        &Context::new(),
        "observe (Uniform(0,1) (*) Uniform(0,1)) as \
         fun x : real * real -> if pi1 x < 0.5 || pi2 x > 0.5 then 1 else 0",
    )
    .unwrap();
    assert_eq!(t.to_string(), "M[real * real]");
}

#[test]
fn expectation_of_bernoulli_indicator() {
    let t = infer(&Context::new(), "E[x ~ Bern(1/4)](if x then 1 else 0)").unwrap();
    assert_eq!(t.to_string(), "preal");
}

#[test]
fn bern_is_subprobability() {
    let t = infer(&Context::new(), "Bern(1/2)").unwrap();
    assert_eq!(t.to_string(), "D[bool]");
    // D is accepted where M is required.
    let t = infer(&Context::new(), "observe Bern(1/2) as fun b : bool -> 1").unwrap();
    assert_eq!(t.to_string(), "M[bool]");
}

#[test]
fn monte_carlo_program_types() {
    let ctx = ctx_of(&[("d", "M[real]"), ("h", "real -> real")]);
    let t = infer(
        &ctx,
        "letrec f (i : int) : M[real] = \
           if i <= 0 then return 0 \
           else mlet m = f (i - 1) in mlet x = d in \
                return (1 / int2real(i) * (h x + m * int2real(i - 1)))",
    )
    .unwrap();
    assert_eq!(t.to_string(), "int -> M[real]");
}

#[test]
fn nondecreasing_recursion_rejected() {
    let err = infer(
        &Context::new(),
        "letrec f (x : int) : M[int] = f x",
    )
    .unwrap_err();
    assert!(err.contains("smaller argument"), "{err}");
}

#[test]
fn gauss_learn_list_recursion_accepted() {
    let ctx = ctx_of(&[("sigma2", "preal"), ("p", "M[real]")]);
    let t = infer(
        &ctx,
        "letrec f (L : list(real)) : M[real] = \
           case L with [] -> p | y :: ls -> observe (f ls) as GPDF(y, sigma2)",
    )
    .unwrap();
    assert_eq!(t.to_string(), "list(real) -> M[real]");
}

#[test]
fn recursion_on_non_tail_rejected() {
    let ctx = ctx_of(&[("p", "M[real]")]);
    let err = infer(
        &ctx,
        "letrec f (L : list(real)) : M[real] = \
           case L with [] -> p | y :: ls -> f (y :: ls)",
    )
    .unwrap_err();
    assert!(err.contains("smaller argument"), "{err}");
}

#[test]
fn m_where_d_required_rejected() {
    let ctx = ctx_of(&[("g", "D[unit] -> preal"), ("m", "M[unit]")]);
    let err = infer(&ctx, "g m").unwrap_err();
    assert!(err.contains("expected"), "{err}");
}

#[test]
fn formula_wf_examples() {
    let env = MacroEnv::default();
    // Γ, r : M[real * real] ⊢ Pr[z ~ r](pi1 z > 1/2) = 1/3 wf
    let ctx = ctx_of(&[("r", "M[real * real]")]);
    let f = parse_formula_str("Pr[z ~ r](pi1 z > 1/2) = 1/3").unwrap();
    let d = desugar_formula(&f, &env).unwrap();
    check_formula_wf(&ctx, &d).unwrap();

    // ⊤ wf in the empty context
    check_formula_wf(&Context::new(), &ppv_core::ast::Formula::Top).unwrap();

    // Chebyshev-style tail-bound formula with r : int -> M[real]
    let ctx = ctx_of(&[("r", "int -> M[real]"), ("mu", "real"), ("eps", "real"), ("s2", "real")]);
    let f = parse_formula_str(
        "forall n : int. 0 < n => \
         Pr[y ~ r n](abs(y - mu) >= eps) <= preal(s2 / (int2real(n) * eps * eps))",
    )
    .unwrap();
    let d = desugar_formula(&f, &env).unwrap();
    check_formula_wf(&ctx, &d).unwrap();

    // sort mismatch rejected
    let f = parse_formula_str("1 = true").unwrap();
    let d = desugar_formula(&f, &env).unwrap();
    assert!(check_formula_wf(&Context::new(), &d).is_err());

    // stray distinguished variable rejected when not declared
    let f = parse_formula_str("Pr[z ~ r](z > 0) = 1").unwrap();
    let d = desugar_formula(&f, &env).unwrap();
    assert!(check_formula_wf(&Context::new(), &d).is_err());
}

#[test]
fn lifted_formulas_typecheck_after_expansion() {
    let env = MacroEnv::default();
    let ctx = ctx_of(&[("r", "D[bool]"), ("alpha", "preal")]);
    let f = parse_formula_str("U(S_ub, alpha, bool, ~(r' = true))").unwrap();
    let d = desugar_formula(&f, &env).unwrap();
    check_formula_wf(&ctx, &d).unwrap();

    let ctx = ctx_of(&[("r1", "D[real]"), ("r2", "D[real]")]);
    let f = parse_formula_str("R(S_cpl, (), real, real, r1' = r2')").unwrap();
    let d = desugar_formula(&f, &env).unwrap();
    check_formula_wf(&ctx, &d).unwrap();
}
