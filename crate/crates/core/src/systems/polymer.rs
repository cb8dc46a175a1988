//! Three-dimensional polymer of unit bonds with both ends tethered.

use super::{Bar, BarFramework, ConstraintSystem, Endpoint, InitialConfiguration, SystemError};

/// Polymer of `n` free particles tethered by unit bars to anchors at the
/// origin and at `(n/2, 0, 0)`.
///
/// Constraint order: anchor–first particle, the `n − 1` inner bonds, last
/// particle–far anchor. `n_vars = 3n`, `m = n + 1`, `f ≡ 1`.
///
/// The starting point is a planar zig-zag in the `xy`-plane. All `n + 1`
/// links advance along `x` and alternate between `+θ` and `−θ`. When `n + 1`
/// is odd the middle link is horizontal instead, so the transverse
/// displacements cancel and the chain closes on the far anchor exactly.
pub fn build_polymer(n: usize) -> Result<(BarFramework, InitialConfiguration), SystemError> {
    if n < 2 {
        return Err(SystemError::InvalidSize(format!("polymer needs n >= 2, got {n}")));
    }
    let span = n as f64 / 2.0;
    let near = [0.0; 3];
    let far = [span, 0.0, 0.0];

    let mut bars = Vec::with_capacity(n + 1);
    bars.push(Bar {
        first: Endpoint::Anchor(near),
        second: Endpoint::Particle(0),
        length_sq: 1.0,
    });
    for k in 0..n - 1 {
        bars.push(Bar {
            first: Endpoint::Particle(k),
            second: Endpoint::Particle(k + 1),
            length_sq: 1.0,
        });
    }
    bars.push(Bar {
        first: Endpoint::Particle(n - 1),
        second: Endpoint::Anchor(far),
        length_sq: 1.0,
    });
    let framework = BarFramework::new(3, n, bars, None);

    let links = n + 1;
    let (tilted, flat_link) = if links % 2 == 0 {
        (links, None)
    } else {
        (links - 1, Some(links / 2))
    };
    let flat = if flat_link.is_some() { 1.0 } else { 0.0 };
    let cos_t = (span - flat) / tilted as f64;
    let sin_t = (1.0 - cos_t * cos_t).sqrt();

    let mut x0 = Vec::with_capacity(3 * n);
    let (mut px, mut py) = (0.0_f64, 0.0_f64);
    let mut sign = 1.0;
    for link in 0..n {
        if Some(link) == flat_link {
            px += 1.0;
        } else {
            px += cos_t;
            py += sign * sin_t;
            sign = -sign;
        }
        x0.extend_from_slice(&[px, py, 0.0]);
    }
    let init = InitialConfiguration::checked(&framework as &dyn ConstraintSystem, x0)?;
    Ok((framework, init))
}
