//! Memory layout for multi-valued grid fields.
//!
//! A field stores `ncomponents` values per grid site. How the (component,
//! site) plane is linearized into one flat allocation is the single most
//! performance-sensitive choice on bandwidth-bound grid codes, and the best
//! choice differs across machines. This module provides the three classic
//! layouts behind one index map:
//!
//! * AoS  — all components of a site stored together,
//! * SoA  — each component stored as its own contiguous array,
//! * AoSoA — components interleaved in short arrays of `sal` sites.
//!
//! AoS and SoA are the `sal = 1` and `sal = nsites_padded` limits of the
//! AoSoA map, so one formula covers everything:
//!
//! ```text
//! index(comp, site) = (site / sal) * ncomponents * sal + comp * sal + site % sal
//! ```

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Errors from layout construction and index mapping.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LayoutError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{what} {value} out of range (limit {limit})")]
    OutOfBounds {
        what: &'static str,
        value: usize,
        limit: usize,
    },
    #[error("cannot parse layout scheme from `{0}` (expected `aos`, `soa` or `aosoa:<sal>`)")]
    ParseScheme(String),
}

/// How the (component, site) plane is linearized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayoutScheme {
    /// Array of structures: components of one site are adjacent.
    Aos,
    /// Structure of arrays: one contiguous array per component.
    Soa,
    /// Array of structures of short arrays with the given short-array length.
    Aosoa { sal: usize },
}

impl LayoutScheme {
    /// Parse the CLI grammar: `aos`, `soa`, `aosoa:<sal>` (lowercase,
    /// colon separator, decimal sal).
    pub fn parse(text: &str) -> Result<Self, LayoutError> {
        match text {
            "aos" => Ok(LayoutScheme::Aos),
            "soa" => Ok(LayoutScheme::Soa),
            _ => {
                let sal = text
                    .strip_prefix("aosoa:")
                    .and_then(|s| s.parse::<usize>().ok())
                    .filter(|&sal| sal >= 1)
                    .ok_or_else(|| LayoutError::ParseScheme(text.to_string()))?;
                Ok(LayoutScheme::Aosoa { sal })
            }
        }
    }
}

impl FromStr for LayoutScheme {
    type Err = LayoutError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LayoutScheme::parse(s)
    }
}

impl fmt::Display for LayoutScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayoutScheme::Aos => write!(f, "aos"),
            LayoutScheme::Soa => write!(f, "soa"),
            LayoutScheme::Aosoa { sal } => write!(f, "aosoa:{sal}"),
        }
    }
}

/// Resolved layout of one field: site counts, component count and the
/// short-array length that drives the index map.
///
/// Immutable after construction; safe to share across workers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayoutDescriptor {
    nsites_logical: usize,
    nsites_padded: usize,
    ncomponents: usize,
    sal: usize,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

fn round_up(n: usize, quantum: usize) -> usize {
    n.div_ceil(quantum) * quantum
}

impl LayoutDescriptor {
    /// Build a layout for `nsites` logical sites of `ncomponents` values
    /// each.
    ///
    /// The allocated site count is padded up to a multiple of
    /// `lcm(sal, vvl)` so that both the short arrays and the lane chunks of
    /// the launch engine tile it evenly. For `Soa` the short-array length
    /// resolves to the padded site count itself (padding quantum `vvl`).
    pub fn new(
        nsites: usize,
        ncomponents: usize,
        scheme: LayoutScheme,
        vvl: usize,
    ) -> Result<Self, LayoutError> {
        if nsites == 0 {
            return Err(LayoutError::InvalidArgument("nsites must be >= 1".into()));
        }
        if ncomponents == 0 {
            return Err(LayoutError::InvalidArgument(
                "ncomponents must be >= 1".into(),
            ));
        }
        if vvl == 0 {
            return Err(LayoutError::InvalidArgument("vvl must be >= 1".into()));
        }
        let (nsites_padded, sal) = match scheme {
            LayoutScheme::Aos => (round_up(nsites, vvl), 1),
            LayoutScheme::Soa => {
                let padded = round_up(nsites, vvl);
                (padded, padded)
            }
            LayoutScheme::Aosoa { sal } => {
                if sal == 0 {
                    return Err(LayoutError::InvalidArgument("sal must be >= 1".into()));
                }
                (round_up(nsites, lcm(sal, vvl)), sal)
            }
        };
        Ok(Self {
            nsites_logical: nsites,
            nsites_padded,
            ncomponents,
            sal,
        })
    }

    pub fn nsites_logical(&self) -> usize {
        self.nsites_logical
    }

    pub fn nsites_padded(&self) -> usize {
        self.nsites_padded
    }

    pub fn ncomponents(&self) -> usize {
        self.ncomponents
    }

    /// Short-array length: 1 for AoS, `nsites_padded` for SoA.
    pub fn sal(&self) -> usize {
        self.sal
    }

    /// Total element count of one allocation.
    pub fn total(&self) -> usize {
        self.nsites_padded * self.ncomponents
    }

    /// Flat offset of component `comp` at site `site`.
    ///
    /// Bounds are checked in debug builds; the safe buffer views check
    /// unconditionally. The `sal = 1` and `sal = nsites_padded` branches
    /// are the AoS and SoA limits of the general expression below them;
    /// the layout tests verify all three agree.
    #[inline]
    pub fn index(&self, comp: usize, site: usize) -> usize {
        debug_assert!(comp < self.ncomponents, "component {comp} out of range");
        debug_assert!(site < self.nsites_padded, "site {site} out of range");
        if self.sal == 1 {
            site * self.ncomponents + comp
        } else if self.sal == self.nsites_padded {
            comp * self.nsites_padded + site
        } else {
            let block = site / self.sal;
            let lane = site - block * self.sal;
            block * self.ncomponents * self.sal + comp * self.sal + lane
        }
    }

    /// Bounds-checked variant of [`index`](Self::index).
    pub fn try_index(&self, comp: usize, site: usize) -> Result<usize, LayoutError> {
        if comp >= self.ncomponents {
            return Err(LayoutError::OutOfBounds {
                what: "component",
                value: comp,
                limit: self.ncomponents,
            });
        }
        if site >= self.nsites_padded {
            return Err(LayoutError::OutOfBounds {
                what: "site",
                value: site,
                limit: self.nsites_padded,
            });
        }
        Ok(self.index(comp, site))
    }
}

/// Multi-dimensional extents of a structured grid and the site ordering
/// convention: row-major with dimension 0 fastest.
///
/// Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridShape {
    dims: Vec<usize>,
}

impl GridShape {
    pub fn new(dims: &[usize]) -> Result<Self, LayoutError> {
        if dims.is_empty() {
            return Err(LayoutError::InvalidArgument(
                "grid needs at least one dimension".into(),
            ));
        }
        if dims.contains(&0) {
            return Err(LayoutError::InvalidArgument(
                "grid extents must be >= 1".into(),
            ));
        }
        Ok(Self {
            dims: dims.to_vec(),
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn nsites(&self) -> usize {
        self.dims.iter().product()
    }

    /// Linear site index of the given coordinates, dimension 0 fastest.
    pub fn site_of(&self, coords: &[usize]) -> Result<usize, LayoutError> {
        if coords.len() != self.dims.len() {
            return Err(LayoutError::InvalidArgument(format!(
                "expected {} coordinates, got {}",
                self.dims.len(),
                coords.len()
            )));
        }
        let mut site = 0;
        let mut stride = 1;
        for (dim, (&c, &extent)) in coords.iter().zip(&self.dims).enumerate() {
            if c >= extent {
                return Err(LayoutError::OutOfBounds {
                    what: match dim {
                        0 => "coordinate 0",
                        1 => "coordinate 1",
                        _ => "coordinate",
                    },
                    value: c,
                    limit: extent,
                });
            }
            site += c * stride;
            stride *= extent;
        }
        Ok(site)
    }

    /// Inverse of [`site_of`](Self::site_of).
    pub fn coords_of(&self, site: usize) -> Result<Vec<usize>, LayoutError> {
        if site >= self.nsites() {
            return Err(LayoutError::OutOfBounds {
                what: "site",
                value: site,
                limit: self.nsites(),
            });
        }
        let mut rest = site;
        let coords = self
            .dims
            .iter()
            .map(|&extent| {
                let c = rest % extent;
                rest /= extent;
                c
            })
            .collect();
        Ok(coords)
    }
}
