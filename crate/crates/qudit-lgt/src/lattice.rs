//! Sites, links, plaquettes and stars of small hypercubic lattices.
//!
//! Sites are numbered `x + Lx * y`. In 2D link `2*site + dir` starts at
//! `site` and points along `dir` (0 = x, 1 = y); in 1D link `n` joins sites
//! `n` and `n+1`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub site: usize,
    pub dir: usize,
    /// Site at the head of the link.
    pub head: usize,
}

/// Four links traversed counter-clockwise: bottom, right, top, left.
///
/// The ordered holonomy is `U1 U2 U3† U4†`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plaquette {
    pub corner: usize,
    pub links: [usize; 4],
    pub dagger: [bool; 4],
}

/// Links meeting at a vertex; `outgoing[i]` is true when `links[i]` starts there.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Star {
    pub site: usize,
    pub links: Vec<usize>,
    pub outgoing: Vec<bool>,
}

impl Star {
    pub fn out_links(&self) -> impl Iterator<Item = usize> + '_ {
        self.links.iter().zip(&self.outgoing).filter(|(_, o)| **o).map(|(l, _)| *l)
    }

    pub fn in_links(&self) -> impl Iterator<Item = usize> + '_ {
        self.links.iter().zip(&self.outgoing).filter(|(_, o)| !**o).map(|(l, _)| *l)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub dim: usize,
    pub extents: Vec<usize>,
    pub periodic: bool,
    pub links: Vec<Link>,
    pub plaquettes: Vec<Plaquette>,
    pub stars: Vec<Star>,
}

impl LatticeSpec {
    pub fn num_sites(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    pub fn site_coords(&self, site: usize) -> Vec<usize> {
        let mut rest = site;
        self.extents
            .iter()
            .map(|&l| {
                let c = rest % l;
                rest /= l;
                c
            })
            .collect()
    }

    /// Staggering sign `(-1)^{Σ coords}`.
    pub fn site_parity(&self, site: usize) -> f64 {
        if self.site_coords(site).iter().sum::<usize>() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Link index for `site` and direction, if that link exists.
    pub fn link_at(&self, site: usize, dir: usize) -> Option<usize> {
        self.links.iter().position(|l| l.site == site && l.dir == dir)
    }
}

pub fn build_lattice(dim: usize, extents: &[usize], periodic: bool) -> Result<LatticeSpec> {
    if extents.len() != dim {
        return invalid(format!("expected {dim} extents, got {}", extents.len()));
    }
    if periodic && extents.iter().any(|&l| l < 2) {
        return invalid("periodic extents must be >= 2");
    }
    if extents.iter().any(|&l| l == 0) {
        return invalid("extents must be positive");
    }
    match dim {
        1 => Ok(chain(extents[0], periodic)),
        2 if periodic => Ok(torus(extents[0], extents[1])),
        2 => Err(Error::UnsupportedFeature("open boundaries in 2D".into())),
        _ => Err(Error::UnsupportedFeature(format!("dimension {dim}"))),
    }
}

fn chain(n: usize, periodic: bool) -> LatticeSpec {
    let nl = if periodic { n } else { n - 1 };
    let links: Vec<Link> = (0..nl).map(|s| Link { site: s, dir: 0, head: (s + 1) % n }).collect();
    let stars = (0..n)
        .map(|s| {
            let mut links_s = Vec::new();
            let mut out = Vec::new();
            if s < nl {
                links_s.push(s);
                out.push(true);
            }
            let prev = (s + n - 1) % n;
            if (periodic || s > 0) && prev < nl {
                links_s.push(prev);
                out.push(false);
            }
            Star { site: s, links: links_s, outgoing: out }
        })
        .collect();
    LatticeSpec { dim: 1, extents: vec![n], periodic, links, plaquettes: Vec::new(), stars }
}

fn torus(lx: usize, ly: usize) -> LatticeSpec {
    let site = |x: usize, y: usize| (x % lx) + lx * (y % ly);
    let h = |x: usize, y: usize| 2 * site(x, y);
    let v = |x: usize, y: usize| 2 * site(x, y) + 1;
    let mut links = Vec::with_capacity(2 * lx * ly);
    for y in 0..ly {
        for x in 0..lx {
            links.push(Link { site: site(x, y), dir: 0, head: site(x + 1, y) });
            links.push(Link { site: site(x, y), dir: 1, head: site(x, y + 1) });
        }
    }
    let mut plaquettes = Vec::with_capacity(lx * ly);
    let mut stars = Vec::with_capacity(lx * ly);
    for y in 0..ly {
        for x in 0..lx {
            plaquettes.push(Plaquette {
                corner: site(x, y),
                links: [h(x, y), v(x + 1, y), h(x, y + 1), v(x, y)],
                dagger: [false, false, true, true],
            });
            stars.push(Star {
                site: site(x, y),
                links: vec![h(x, y), v(x, y), h(x + lx - 1, y), v(x, y + ly - 1)],
                outgoing: vec![true, true, false, false],
            });
        }
    }
    LatticeSpec { dim: 2, extents: vec![lx, ly], periodic: true, links, plaquettes, stars }
}
