//! Object-language types: basic types, products, lists, arrows and the two
//! monadic types `M[t]` (general measures) and `D[t]` (subprobability measures).

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TypeTerm {
    Unit,
    Bool,
    Int,
    Real,
    PReal,
    Prod(Box<TypeTerm>, Box<TypeTerm>),
    List(Box<TypeTerm>),
    Arrow(Box<TypeTerm>, Box<TypeTerm>),
    /// `M[t]`: measures over `t`.
    Meas(Box<TypeTerm>),
    /// `D[t]`: subprobability measures over `t`. `D[t] <= M[t]`.
    SubProb(Box<TypeTerm>),
    /// Placeholder for an annotation left implicit in the surface syntax
    /// (for example the binder of an `mlet`); filled in by the typechecker.
    Hole,
}

impl TypeTerm {
    pub fn prod(a: TypeTerm, b: TypeTerm) -> TypeTerm {
        TypeTerm::Prod(Box::new(a), Box::new(b))
    }
    pub fn arrow(a: TypeTerm, b: TypeTerm) -> TypeTerm {
        TypeTerm::Arrow(Box::new(a), Box::new(b))
    }
    pub fn list(a: TypeTerm) -> TypeTerm {
        TypeTerm::List(Box::new(a))
    }
    pub fn meas(a: TypeTerm) -> TypeTerm {
        TypeTerm::Meas(Box::new(a))
    }
    pub fn subprob(a: TypeTerm) -> TypeTerm {
        TypeTerm::SubProb(Box::new(a))
    }

    /// Basic types: unit/bool/int/real/preal closed under products and lists.
    pub fn is_basic(&self) -> bool {
        match self {
            TypeTerm::Unit | TypeTerm::Bool | TypeTerm::Int | TypeTerm::Real | TypeTerm::PReal => {
                true
            }
            TypeTerm::Prod(a, b) => a.is_basic() && b.is_basic(),
            TypeTerm::List(a) => a.is_basic(),
            TypeTerm::Arrow(..) | TypeTerm::Meas(..) | TypeTerm::SubProb(..) | TypeTerm::Hole => {
                false
            }
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, TypeTerm::Int | TypeTerm::Real | TypeTerm::PReal)
    }

    /// Subtyping: `D[t] <= M[t]`, congruent through arrows (covariant result,
    /// contravariant argument), products and lists. One-directional.
    pub fn subtype_of(&self, other: &TypeTerm) -> bool {
        use TypeTerm::*;
        match (self, other) {
            (SubProb(a), Meas(b)) => a.subtype_of(b),
            (SubProb(a), SubProb(b)) | (Meas(a), Meas(b)) | (List(a), List(b)) => a.subtype_of(b),
            (Prod(a1, a2), Prod(b1, b2)) => a1.subtype_of(b1) && a2.subtype_of(b2),
            (Arrow(a1, a2), Arrow(b1, b2)) => b1.subtype_of(a1) && a2.subtype_of(b2),
            _ => self == other,
        }
    }
}

impl fmt::Display for TypeTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Arrow is right-associative and binds loosest; product binds tighter.
        fn atom(t: &TypeTerm, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            match t {
                TypeTerm::Unit => write!(f, "unit"),
                TypeTerm::Bool => write!(f, "bool"),
                TypeTerm::Int => write!(f, "int"),
                TypeTerm::Real => write!(f, "real"),
                TypeTerm::PReal => write!(f, "preal"),
                TypeTerm::List(a) => write!(f, "list({a})"),
                TypeTerm::Meas(a) => write!(f, "M[{a}]"),
                TypeTerm::SubProb(a) => write!(f, "D[{a}]"),
                TypeTerm::Hole => write!(f, "_"),
                _ => write!(f, "({t})"),
            }
        }
        fn prod(t: &TypeTerm, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            match t {
                TypeTerm::Prod(a, b) => {
                    atom(a, f)?;
                    write!(f, " * ")?;
                    prod(b, f)
                }
                _ => atom(t, f),
            }
        }
        match self {
            TypeTerm::Arrow(a, b) => {
                prod(a, f)?;
                write!(f, " -> ")?;
                b.fmt(f)
            }
            _ => prod(self, f),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_type_predicate() {
        let t = TypeTerm::prod(TypeTerm::Real, TypeTerm::list(TypeTerm::Bool));
        assert!(t.is_basic());
        assert!(!TypeTerm::meas(TypeTerm::Real).is_basic());
        assert!(!TypeTerm::arrow(TypeTerm::Real, TypeTerm::Real).is_basic());
        assert!(!TypeTerm::prod(TypeTerm::Real, TypeTerm::meas(TypeTerm::Real)).is_basic());
        assert!(!TypeTerm::subprob(TypeTerm::Unit).is_basic());
    }

    #[test]
    fn subprob_subtyping_is_one_directional() {
        let d = TypeTerm::subprob(TypeTerm::Bool);
        let m = TypeTerm::meas(TypeTerm::Bool);
        assert!(d.subtype_of(&m));
        assert!(!m.subtype_of(&d));
        // congruence through arrows: (τ -> D[θ]) <= (τ -> M[θ])
        let f1 = TypeTerm::arrow(TypeTerm::Real, d.clone());
        let f2 = TypeTerm::arrow(TypeTerm::Real, m.clone());
        assert!(f1.subtype_of(&f2));
        assert!(!f2.subtype_of(&f1));
    }

    #[test]
    fn display_round_shape() {
        let t = TypeTerm::arrow(
            TypeTerm::prod(TypeTerm::Real, TypeTerm::Real),
            TypeTerm::meas(TypeTerm::Real),
        );
        assert_eq!(t.to_string(), "real * real -> M[real]");
    }
}
