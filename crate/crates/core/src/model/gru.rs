use crate::tensor::{Tape, TensorError, Var};

/// Parameter names of one GRU block, in storage order.
pub const GRU_PARTS: [&str; 9] = [
    "w_r", "w_z", "w_h", "u_r", "u_z", "u_h", "b_r", "b_z", "b_h",
];

/// Tape handles for one GRU's weights. `w_*` map the input (hidden × input),
/// `u_*` the previous state (hidden × hidden).
#[derive(Clone, Copy, Debug)]
pub struct GruVars {
    pub w_r: Var,
    pub w_z: Var,
    pub w_h: Var,
    pub u_r: Var,
    pub u_z: Var,
    pub u_h: Var,
    pub b_r: Var,
    pub b_z: Var,
    pub b_h: Var,
}

impl GruVars {
    /// Handles from nine consecutive bound parameters.
    pub fn from_slice(v: &[Var]) -> Self {
        GruVars {
            w_r: v[0],
            w_z: v[1],
            w_h: v[2],
            u_r: v[3],
            u_z: v[4],
            u_h: v[5],
            b_r: v[6],
            b_z: v[7],
            b_h: v[8],
        }
    }
}

/// Names and shapes of one GRU block's parameters under `prefix`.
pub(crate) fn gru_specs(prefix: &str, input: usize, hidden: usize) -> Vec<(String, Vec<usize>)> {
    GRU_PARTS
        .iter()
        .map(|part| {
            let shape = match part.as_bytes()[0] {
                b'w' => vec![hidden, input],
                b'u' => vec![hidden, hidden],
                _ => vec![hidden],
            };
            (format!("{prefix}.{part}"), shape)
        })
        .collect()
}

/// One GRU step:
///
/// ```text
/// r  = σ(W_r x + U_r h + b_r)
/// z  = σ(W_z x + U_z h + b_z)
/// ĥ  = tanh(W_h x + U_h (r ⊙ h) + b_h)
/// h' = (1 − z) ⊙ h + z ⊙ ĥ
/// ```
pub fn gru_cell_step(tape: &mut Tape, x: Var, h: Var, g: &GruVars) -> Result<Var, TensorError> {
    let gate = |tape: &mut Tape, w: Var, u: Var, b: Var, h_in: Var| -> Result<Var, TensorError> {
        let wx = tape.matmul(w, x)?;
        let uh = tape.matmul(u, h_in)?;
        tape.add_n(&[wx, uh, b])
    };
    let r_pre = gate(tape, g.w_r, g.u_r, g.b_r, h)?;
    let r = tape.sigmoid(r_pre);
    let z_pre = gate(tape, g.w_z, g.u_z, g.b_z, h)?;
    let z = tape.sigmoid(z_pre);
    let rh = tape.mul(r, h)?;
    let c_pre = gate(tape, g.w_h, g.u_h, g.b_h, rh)?;
    let candidate = tape.tanh(c_pre);
    let keep = tape.one_minus(z);
    let kept = tape.mul(keep, h)?;
    let fresh = tape.mul(z, candidate)?;
    tape.add(kept, fresh)
}
