//! Per-instance evaluation neighbourhoods over the test set.

use serde::{Deserialize, Serialize};

use crate::linalg::euclidean;

/// How the radius of a fidelity sphere grows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SphereRule {
    /// Radius reaches the `ceil(p * n_enemy)`-th nearest test enemy.
    #[default]
    EnemyQuantile,
    /// Radius grows through the test rows by distance and stops at the first
    /// radius where enemies make up at least `1 - p` of the rows inside.
    EnemyShare,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sphere {
    pub radius: f64,
    /// Test indices inside the closed ball, centre excluded, ascending.
    pub indices: Vec<usize>,
}

/// Why an instance could not be evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Skip {
    /// The black box labels every test row like the centre.
    NoEnemies,
    /// Every row inside the sphere carries the same black-box label.
    SingleClass,
    /// The strategy could not build a surrogate (e.g. no training enemy).
    NoSurrogate,
}

/// Sphere around test row `z_index` per `rule` with fraction `p` in (0, 1).
pub fn fidelity_sphere(rows: &[Vec<f64>], predicted: &[usize], z_index: usize, p: f64, rule: SphereRule) -> Result<Sphere, Skip> {
    let z = &rows[z_index];
    let c_z = predicted[z_index];
    let mut others: Vec<(f64, usize)> = rows
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != z_index)
        .map(|(i, r)| (euclidean(r, z), i))
        .collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let n_enemy = others.iter().filter(|&&(_, i)| predicted[i] != c_z).count();
    if n_enemy == 0 {
        return Err(Skip::NoEnemies);
    }
    let radius = match rule {
        SphereRule::EnemyQuantile => {
            let rank = ((p * n_enemy as f64).ceil() as usize).clamp(1, n_enemy);
            others
                .iter()
                .filter(|&&(_, i)| predicted[i] != c_z)
                .nth(rank - 1)
                .map(|&(d, _)| d)
                .expect("rank within enemy count")
        }
        SphereRule::EnemyShare => {
            let target = 1.0 - p;
            let mut enemies = 0usize;
            let mut radius = others.last().map_or(0.0, |o| o.0);
            let mut k = 0;
            while k < others.len() {
                // Admit every row at this distance together.
                let d = others[k].0;
                while k < others.len() && others[k].0 == d {
                    enemies += usize::from(predicted[others[k].1] != c_z);
                    k += 1;
                }
                if enemies > 0 && enemies as f64 >= target * k as f64 {
                    radius = d;
                    break;
                }
            }
            radius
        }
    };
    let mut indices: Vec<usize> = others.iter().take_while(|o| o.0 <= radius).map(|o| o.1).collect();
    indices.sort_unstable();
    Ok(Sphere { radius, indices })
}
