//! Named catalog instances.

use serde::Serialize;

use super::PhiFunction;

/// A catalog instance together with a load `ρ` for which its normalizing
/// series converges.
#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub phi: PhiFunction,
    pub rho: f64,
}

/// A Bernstein function `f` paired with its closed-form inverse `h`.
#[derive(Debug, Clone)]
pub struct InversePair {
    pub label: &'static str,
    pub f: PhiFunction,
}

impl InversePair {
    /// `h(s)` from the closed form.
    pub fn h(&self, s: f64) -> f64 {
        self.f
            .closed_form_inverse(s)
            .expect("catalog pairs carry a closed-form inverse")
    }

    /// Upper end of the domain of `h`.
    pub fn h_domain_sup(&self) -> f64 {
        self.f.limit_at_sup()
    }
}

/// Listing row for the `catalog` subcommand.
#[derive(Debug, Clone, Serialize)]
pub struct CatalogListing {
    pub id: String,
    pub kind: &'static str,
    pub flags: Vec<&'static str>,
    pub domain_sup: String,
    pub limit: String,
    pub default_rho: f64,
    pub closed_form_product: bool,
    pub closed_form_inverse: bool,
}

fn parse(id: &str) -> PhiFunction {
    id.parse().expect("catalog ids are valid")
}

fn ext(v: f64) -> String {
    if v.is_finite() {
        format!("{v:?}")
    } else {
        "inf".to_string()
    }
}

/// The eight Bernstein / inverse-Bernstein pairs.
pub fn inverse_pairs() -> Vec<InversePair> {
    [
        ("power", "power:0.5"),
        ("ratio", "ratio:2.0"),
        ("shiftedpower", "shiftedpower:0.5"),
        ("sqrtratio", "sqrtratio:3.0"),
        ("lambert", "lambert"),
        ("logpower", "logpower:0.5"),
        ("logcosh", "logcosh"),
        ("logshift", "logshift:2.0"),
    ]
    .into_iter()
    .map(|(label, id)| InversePair {
        label,
        f: parse(id),
    })
    .collect()
}

/// Every catalog instance with a convergent default load.
pub fn entries() -> Vec<CatalogEntry> {
    [
        ("id", 1.0),
        ("power:0.5", 1.0),
        ("power:2.0", 2.0),
        ("ratio:1.0", 0.5),
        ("shiftedpower:0.5", 1.0),
        ("sqrtratio:1.0", 0.5),
        ("lambert", 1.0),
        ("logpower:0.5", 0.5),
        ("logcosh", 1.0),
        ("logshift:1.0", 1.0),
        ("explinear", 1.0),
        ("quadraticshift", 0.7),
        ("rationalshift:2.0,1.0", 0.5),
        ("rationalshift:1.0,2.0", 0.5),
        ("ratioquadratic", 0.7),
        ("inv:power:0.5", 2.0),
        ("inv:ratio:20.0", 0.1),
        ("inv:shiftedpower:0.5", 1.0),
        ("inv:sqrtratio:400.0", 0.1),
        ("inv:logpower:0.5", 1.0),
        ("inv:logcosh", 1.0),
        ("inv:logshift:1.0", 1.0),
    ]
    .into_iter()
    .map(|(id, rho)| CatalogEntry {
        phi: parse(id),
        rho,
    })
    .collect()
}

pub fn listing() -> Vec<CatalogListing> {
    entries()
        .into_iter()
        .map(|e| CatalogListing {
            id: e.phi.id(),
            kind: e.phi.kind_name(),
            flags: e.phi.flags().names(),
            domain_sup: ext(e.phi.domain_sup()),
            limit: ext(e.phi.limit_at_sup()),
            default_rho: e.rho,
            closed_form_product: e.phi.ln_closed_form_product(1).is_some(),
            closed_form_inverse: e.phi.closed_form_inverse(0.5).is_some(),
        })
        .collect()
}
