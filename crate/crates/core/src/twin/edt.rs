//! Exact squared Euclidean distance transform (separable lower-envelope
//! method), with anisotropic voxel spacing.

use crate::exec::{self, Execution};

/// Reusable buffers for the 1-D transform.
#[derive(Default)]
pub(crate) struct Scratch {
    f: Vec<f64>,
    out: Vec<f64>,
    v: Vec<usize>,
    z: Vec<f64>,
}

impl Scratch {
    fn load(&mut self, n: usize) {
        self.f.clear();
        self.f.reserve(n);
        self.out.clear();
        self.out.resize(n, 0.0);
    }
}

/// `out[q] = min_p f[p] + (w·(q - p))²`, skipping infinite samples. When every
/// sample is infinite the output is infinite everywhere.
pub(crate) fn transform_1d(f: &[f64], w: f64, out: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    let n = f.len();
    let w2 = w * w;
    v.clear();
    z.clear();
    for q in 0..n {
        if f[q] == f64::INFINITY {
            continue;
        }
        let qf = q as f64;
        let hq = f[q] + w2 * qf * qf;
        loop {
            let Some(&p) = v.last() else {
                v.push(q);
                z.push(f64::NEG_INFINITY);
                break;
            };
            let pf = p as f64;
            let s = (hq - (f[p] + w2 * pf * pf)) / (2.0 * w2 * (qf - pf));
            if s <= *z.last().unwrap() {
                v.pop();
                z.pop();
                continue;
            }
            v.push(q);
            z.push(s);
            break;
        }
    }
    if v.is_empty() {
        out.fill(f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while k + 1 < v.len() && z[k + 1] < qf {
            k += 1;
        }
        let p = v[k];
        let d = qf - p as f64;
        *o = f[p] + w2 * d * d;
    }
}

/// Squared distance (mm²) from every voxel centre to the nearest feature voxel
/// centre. Layout is x-fastest.
pub(crate) fn squared_edt(feature: &[bool], dims: [usize; 3], spacing: [f64; 3], exec: Execution) -> Vec<f64> {
    let [nx, ny, nz] = dims;
    let mut g: Vec<f64> = feature.iter().map(|&f| if f { 0.0 } else { f64::INFINITY }).collect();

    // x lines are contiguous
    exec::for_each_chunk_mut(exec, &mut g, nx, |_, line| {
        let mut s = Scratch::default();
        s.load(nx);
        s.f.extend_from_slice(line);
        transform_1d(&s.f, spacing[0], &mut s.out, &mut s.v, &mut s.z);
        line.copy_from_slice(&s.out);
    });

    // y lines live inside one z slab
    exec::for_each_chunk_mut(exec, &mut g, nx * ny, |_, slab| {
        let mut s = Scratch::default();
        for i in 0..nx {
            s.load(ny);
            s.f.extend((0..ny).map(|j| slab[i + nx * j]));
            transform_1d(&s.f, spacing[1], &mut s.out, &mut s.v, &mut s.z);
            for j in 0..ny {
                slab[i + nx * j] = s.out[j];
            }
        }
    });

    // z columns: compute per row j, then scatter
    let rows: Vec<Vec<f64>> = exec::map_range(exec, ny, |j| {
        let mut s = Scratch::default();
        let mut row = vec![0.0; nx * nz];
        for i in 0..nx {
            s.load(nz);
            s.f.extend((0..nz).map(|k| g[i + nx * (j + ny * k)]));
            transform_1d(&s.f, spacing[2], &mut s.out, &mut s.v, &mut s.z);
            row[i * nz..(i + 1) * nz].copy_from_slice(&s.out);
        }
        row
    });
    for (j, row) in rows.iter().enumerate() {
        for i in 0..nx {
            for k in 0..nz {
                g[i + nx * (j + ny * k)] = row[i * nz + k];
            }
        }
    }
    g
}
