//! Self-maps of a carrier.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::space::{MetricSpace, Point};

pub type Rule = Arc<dyn Fn(&Point) -> Result<Point> + Send + Sync>;

#[derive(Clone)]
enum Body {
    /// `targets[i]` is the image of point `i`; `None` marks a point outside
    /// the certification domain.
    Table(Vec<Option<usize>>),
    Rule {
        rule: Rule,
        /// Finite certification domain, when one is known.
        domain: Option<Vec<Point>>,
    },
}

/// A map of a carrier into itself, table- or rule-backed.
#[derive(Clone)]
pub struct SelfMap {
    label: String,
    domain_note: String,
    body: Body,
}

impl fmt::Debug for SelfMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.body {
            Body::Table(t) => f
                .debug_struct("SelfMap")
                .field("label", &self.label)
                .field("table", t)
                .finish(),
            Body::Rule { .. } => f
                .debug_struct("SelfMap")
                .field("label", &self.label)
                .field("rule", &self.domain_note)
                .finish(),
        }
    }
}

impl SelfMap {
    /// A total table map: point `i` goes to `targets[i]`.
    pub fn table(label: impl Into<String>, targets: Vec<usize>) -> Self {
        SelfMap {
            label: label.into(),
            domain_note: "whole carrier".into(),
            body: Body::Table(targets.into_iter().map(Some).collect()),
        }
    }

    /// A table map defined only where the entry is `Some`.
    pub fn partial_table(
        label: impl Into<String>,
        targets: Vec<Option<usize>>,
        domain_note: impl Into<String>,
    ) -> Self {
        SelfMap {
            label: label.into(),
            domain_note: domain_note.into(),
            body: Body::Table(targets),
        }
    }

    pub fn rule(label: impl Into<String>, domain_note: impl Into<String>, rule: Rule) -> Self {
        SelfMap {
            label: label.into(),
            domain_note: domain_note.into(),
            body: Body::Rule { rule, domain: None },
        }
    }

    /// Pins a finite certification domain on a rule-backed map.
    pub fn with_domain(mut self, points: Vec<Point>) -> Self {
        if let Body::Rule { domain, .. } = &mut self.body {
            *domain = Some(points);
        }
        self
    }

    pub fn identity(n: usize) -> Self {
        SelfMap::table("identity", (0..n).collect())
    }

    pub fn constant(n: usize, value: usize) -> Self {
        SelfMap::table(format!("constant({value})"), vec![value; n])
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn domain_note(&self) -> &str {
        &self.domain_note
    }

    /// Target table of a table-backed map.
    pub fn targets(&self) -> Option<&[Option<usize>]> {
        match &self.body {
            Body::Table(t) => Some(t),
            Body::Rule { .. } => None,
        }
    }

    /// Total target table, when every entry is defined.
    pub fn total_table(&self) -> Option<Vec<usize>> {
        self.targets()?.iter().copied().collect()
    }

    pub fn apply(&self, x: &Point) -> Result<Point> {
        match (&self.body, x) {
            (Body::Table(t), Point::Id(i)) => match t.get(*i) {
                Some(Some(j)) => Ok(Point::Id(*j)),
                Some(None) => Err(Error::Boundary(format!(
                    "point #{i} lies outside the certification domain of {:?}",
                    self.label
                ))),
                None => Err(Error::Domain(format!("point #{i} is not in the map's carrier"))),
            },
            (Body::Table(_), p) => Err(Error::Domain(format!(
                "table map {:?} cannot be applied to {p}",
                self.label
            ))),
            (Body::Rule { rule, .. }, p) => rule(p),
        }
    }

    /// The certification domain as a finite list, when it is finite.
    ///
    /// Rule maps without a pinned domain on a materialized space use every
    /// carrier point at which the rule is defined.
    pub fn domain(&self, space: &MetricSpace) -> Option<Vec<Point>> {
        match &self.body {
            Body::Table(t) => Some(
                t.iter()
                    .enumerate()
                    .filter(|(_, v)| v.is_some())
                    .map(|(i, _)| Point::Id(i))
                    .collect(),
            ),
            Body::Rule { domain: Some(d), .. } => Some(d.clone()),
            Body::Rule { domain: None, .. } => Some(
                space
                    .points()?
                    .into_iter()
                    .filter(|p| self.apply(p).is_ok())
                    .collect(),
            ),
        }
    }

    /// Checks that the map's domain and image lie in `space`.
    pub fn check_against(&self, space: &MetricSpace) -> Result<()> {
        if let Some(t) = self.targets() {
            if space.len() != Some(t.len()) {
                return Err(Error::Domain(format!(
                    "table of length {} does not match space {:?}",
                    t.len(),
                    space.label()
                )));
            }
            if let Some(j) = t.iter().flatten().find(|j| **j >= t.len()) {
                return Err(Error::Domain(format!("table target #{j} is not a carrier point")));
            }
        }
        Ok(())
    }
}
