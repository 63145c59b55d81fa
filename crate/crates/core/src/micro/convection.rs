use crate::grid::GridSpec;

/// Skew-symmetric convection `C(a) u` on a walled MAC grid.
///
/// Each face control volume exchanges `u` with its four neighbors through
/// the mass flux of `a` across the shared side; the coupling is
/// `(1 / 2V) sum_nb m_nb u_nb`, antisymmetric because the flux leaving one
/// volume enters the other. Hence `<C(a) u, u> = 0` for every `a`, and for
/// discretely solenoidal `a` it is the central form of `(a . grad) u`.
/// Rows of `blocked` faces are left at zero.
pub fn convect(g: &GridSpec, a: &[f64], u: &[f64], blocked: &[bool], out: &mut [f64]) {
    debug_assert!(!g.periodic_x && !g.periodic_y);
    let nu = g.n_u();
    let (hx, hy) = (g.hx(), g.hy());
    let inv = 0.5 / (hx * hy);
    let au = |i: usize, j: usize| a[g.u_face(i, j)];
    let av = |i: usize, j: usize| a[nu + g.v_face(i, j)];
    let uu = |i: usize, j: usize| u[g.u_face(i, j)];
    let uv = |i: usize, j: usize| u[nu + g.v_face(i, j)];
    out.iter_mut().for_each(|x| *x = 0.0);
    for j in 0..g.ny {
        for i in 1..g.nx {
            let f = g.u_face(i, j);
            if blocked[f] {
                continue;
            }
            let mut s = 0.5 * (au(i, j) + au(i + 1, j)) * hy * uu(i + 1, j)
                - 0.5 * (au(i - 1, j) + au(i, j)) * hy * uu(i - 1, j);
            if j + 1 < g.ny {
                s += 0.5 * (av(i - 1, j + 1) + av(i, j + 1)) * hx * uu(i, j + 1);
            }
            if j > 0 {
                s -= 0.5 * (av(i - 1, j) + av(i, j)) * hx * uu(i, j - 1);
            }
            out[f] = inv * s;
        }
    }
    for j in 1..g.ny {
        for i in 0..g.nx {
            let f = nu + g.v_face(i, j);
            if blocked[f] {
                continue;
            }
            let mut s = 0.5 * (av(i, j) + av(i, j + 1)) * hx * uv(i, j + 1)
                - 0.5 * (av(i, j - 1) + av(i, j)) * hx * uv(i, j - 1);
            if i + 1 < g.nx {
                s += 0.5 * (au(i + 1, j - 1) + au(i + 1, j)) * hy * uv(i + 1, j);
            }
            if i > 0 {
                s -= 0.5 * (au(i, j - 1) + au(i, j)) * hy * uv(i - 1, j);
            }
            out[f] = inv * s;
        }
    }
}
