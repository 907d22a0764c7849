//! Type model for the static checks and the assignment compatibility table.
//!
//! Compatibility is exact match plus the widenings INT→DINT and REAL→LREAL.
//! BOOL never mixes with numerics and TIME only mixes with TIME. Untyped
//! integer and real literals adopt the type of their context.

use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Ty {
    /// Elementary type name, upper-case.
    Named(String),
    /// Instance of a function block type, upper-case type name.
    Fb(String),
    Array(Box<Ty>),
    IntLit,
    RealLit,
    /// Result of an earlier error; compatible with everything.
    Unknown,
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::Named(n) | Ty::Fb(n) => f.write_str(n),
            Ty::Array(e) => write!(f, "ARRAY OF {e}"),
            Ty::IntLit => f.write_str("integer literal"),
            Ty::RealLit => f.write_str("real literal"),
            Ty::Unknown => f.write_str("unknown"),
        }
    }
}

const INTS: &[&str] = &["SINT", "INT", "DINT", "LINT", "USINT", "UINT", "UDINT", "ULINT"];
const BITS: &[&str] = &["BYTE", "WORD", "DWORD", "LWORD"];
const REALS: &[&str] = &["REAL", "LREAL"];
const WIDENINGS: &[(&str, &str)] = &[("INT", "DINT"), ("REAL", "LREAL")];

impl Ty {
    pub fn named(name: &str) -> Ty {
        Ty::Named(name.to_ascii_uppercase())
    }

    pub fn bool() -> Ty {
        Ty::named("BOOL")
    }

    fn name(&self) -> Option<&str> {
        match self {
            Ty::Named(n) => Some(n),
            _ => None,
        }
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self, Ty::Unknown)
    }

    pub fn is_bool(&self) -> bool {
        self.name() == Some("BOOL")
    }

    pub fn is_integer(&self) -> bool {
        matches!(self, Ty::IntLit) || self.name().is_some_and(|n| INTS.contains(&n))
    }

    pub fn is_real(&self) -> bool {
        matches!(self, Ty::RealLit) || self.name().is_some_and(|n| REALS.contains(&n))
    }

    pub fn is_numeric(&self) -> bool {
        self.is_integer() || self.is_real()
    }

    pub fn is_bit_string(&self) -> bool {
        self.name().is_some_and(|n| BITS.contains(&n))
    }

    pub fn is_time(&self) -> bool {
        self.name() == Some("TIME")
    }

    /// Generic parameter families used by catalog signatures.
    pub fn is_generic(&self) -> bool {
        self.name().is_some_and(|n| n.starts_with("ANY"))
    }

    fn generic_accepts(family: &str, src: &Ty) -> bool {
        match family {
            "ANY" => !matches!(src, Ty::Fb(_)),
            "ANY_NUM" => src.is_numeric(),
            "ANY_INT" => src.is_integer(),
            "ANY_REAL" => src.is_real(),
            "ANY_BIT" => src.is_bit_string() || src.is_bool() || matches!(src, Ty::IntLit),
            _ => false,
        }
    }
}

/// Whether a value of type `src` may be stored into `target`.
pub fn assignable(target: &Ty, src: &Ty) -> bool {
    if target.is_unknown() || src.is_unknown() {
        return true;
    }
    if let Some(family) = target.name().filter(|_| target.is_generic()) {
        return Ty::generic_accepts(family, src);
    }
    match (target, src) {
        (_, Ty::IntLit) => target.is_integer() || target.is_bit_string(),
        (_, Ty::RealLit) => target.is_real(),
        (Ty::Named(t), Ty::Named(s)) => t == s || WIDENINGS.contains(&(s.as_str(), t.as_str())),
        (Ty::Fb(t), Ty::Fb(s)) => t == s,
        (Ty::Array(t), Ty::Array(s)) => t == s,
        _ => false,
    }
}

/// Common type of two arithmetic operands, if they combine.
pub fn unify_numeric(a: &Ty, b: &Ty) -> Option<Ty> {
    match (a, b) {
        (Ty::Unknown, _) | (_, Ty::Unknown) => Some(Ty::Unknown),
        (Ty::IntLit, Ty::IntLit) => Some(Ty::IntLit),
        (Ty::IntLit | Ty::RealLit, Ty::IntLit | Ty::RealLit) => Some(Ty::RealLit),
        (lit @ (Ty::IntLit | Ty::RealLit), other) | (other, lit @ (Ty::IntLit | Ty::RealLit)) => {
            (other.is_numeric() && assignable(other, lit)).then(|| other.clone())
        }
        _ if !a.is_numeric() || !b.is_numeric() => None,
        _ if assignable(a, b) => Some(a.clone()),
        _ if assignable(b, a) => Some(b.clone()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compatibility_table() {
        let int = Ty::named("INT");
        let dint = Ty::named("DINT");
        let real = Ty::named("REAL");
        let lreal = Ty::named("LREAL");
        let time = Ty::named("TIME");
        let b = Ty::bool();
        assert!(assignable(&dint, &int));
        assert!(!assignable(&int, &dint));
        assert!(assignable(&lreal, &real));
        assert!(!assignable(&real, &int));
        assert!(!assignable(&int, &b));
        assert!(!assignable(&b, &int));
        assert!(assignable(&time, &time));
        assert!(!assignable(&time, &dint));
        assert!(!assignable(&time, &Ty::IntLit));
        assert!(assignable(&int, &Ty::IntLit));
        assert!(assignable(&Ty::named("WORD"), &Ty::IntLit));
        assert!(!assignable(&real, &Ty::IntLit));
        assert!(assignable(&real, &Ty::RealLit));
        assert!(assignable(&Ty::named("ANY_NUM"), &real));
        assert!(!assignable(&Ty::named("ANY_NUM"), &b));
        assert!(assignable(&int, &Ty::Unknown));
    }

    #[test]
    fn numeric_unification() {
        let int = Ty::named("INT");
        let dint = Ty::named("DINT");
        assert_eq!(unify_numeric(&int, &dint), Some(dint.clone()));
        assert_eq!(unify_numeric(&Ty::IntLit, &dint), Some(dint.clone()));
        assert_eq!(unify_numeric(&Ty::bool(), &int), None);
        assert_eq!(unify_numeric(&Ty::named("REAL"), &int), None);
        assert_eq!(unify_numeric(&Ty::RealLit, &int), None);
    }
}
