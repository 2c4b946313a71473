use super::matrix::{dot, Matrix};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    MulElem(Var, Var),
    Transpose(Var),
    ConcatRows(Vec<Var>),
    MeanRows(Var),
    GatherRows(Var, Vec<usize>),
    Inner(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    Scale(Var, f64),
    Sum(Var),
    StopGradient,
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

/// Records matrix operations in execution order and replays them in
/// reverse to compute gradients.
///
/// Leaves created with [`Tape::param`] accumulate gradients across
/// [`Tape::backward`] calls until [`Tape::zero_grad`].
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Matrix>>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(
        &mut self,
        value: Matrix,
        op: Op,
        requires_grad: bool,
        name: &'static str,
    ) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite(name));
        }
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        self.grads.push(None);
        Ok(Var(self.nodes.len() - 1))
    }

    fn requires(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A trainable leaf with a zeroed gradient accumulator.
    pub fn param(&mut self, value: Matrix) -> Result<Var> {
        let shape = value.shape();
        let v = self.push(value, Op::Leaf, true, "param")?;
        self.grads[v.0] = Some(Matrix::zeros(shape.0, shape.1));
        Ok(v)
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, value: Matrix) -> Result<Var> {
        self.push(value, Op::Leaf, false, "constant")
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.requires(v)
    }

    /// Accumulated gradient of a parameter leaf.
    pub fn grad(&self, v: Var) -> Option<&Matrix> {
        self.grads[v.0].as_ref()
    }

    pub fn zero_grad(&mut self) {
        for g in self.grads.iter_mut().flatten() {
            g.data_mut().iter_mut().for_each(|x| *x = 0.0);
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.requires(a) || self.requires(b);
        self.push(value, Op::MatMul(a, b), rg, "matmul")
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::Shape {
                op,
                lhs: sa,
                rhs: sb,
            });
        }
        Ok(())
    }

    fn zip(
        &mut self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        record: Op,
    ) -> Result<Var> {
        self.same_shape(op, a, b)?;
        let (va, vb) = (self.value(a), self.value(b));
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let value = Matrix::from_vec(va.rows(), va.cols(), data)?;
        let rg = self.requires(a) || self.requires(b);
        self.push(value, record, rg, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul_elem(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("mul_elem", a, b, |x, y| x * y, Op::MulElem(a, b))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).transpose();
        let rg = self.requires(a);
        self.push(value, Op::Transpose(a), rg, "transpose")
    }

    /// Stacks the inputs vertically; all must have the same column count.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::Shape {
                op: "concat_rows",
                lhs: (0, 0),
                rhs: (0, 0),
            });
        };
        let cols = self.value(first).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let v = self.value(p);
            if v.cols() != cols {
                return Err(Error::Shape {
                    op: "concat_rows",
                    lhs: self.value(first).shape(),
                    rhs: v.shape(),
                });
            }
            rows += v.rows();
            data.extend_from_slice(v.data());
        }
        let rg = parts.iter().any(|&p| self.requires(p));
        self.push(
            Matrix::from_vec(rows, cols, data)?,
            Op::ConcatRows(parts.to_vec()),
            rg,
            "concat_rows",
        )
    }

    /// Column-wise mean, as a `1 x cols` row.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).mean_rows()?;
        let rg = self.requires(a);
        self.push(out, Op::MeanRows(a), rg, "mean_rows")
    }

    /// Row `indices[i]` of `src` as row `i`; the same as multiplying by a
    /// one-hot matrix, without materializing it.
    pub fn gather_rows(&mut self, src: Var, indices: &[usize]) -> Result<Var> {
        let value = self.value(src).gather_rows(indices)?;
        let rg = self.requires(src);
        self.push(
            value,
            Op::GatherRows(src, indices.to_vec()),
            rg,
            "gather_rows",
        )
    }

    /// Frobenius inner product of two same-shape matrices, as a 1x1.
    pub fn inner_product(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("inner_product", a, b)?;
        let value = Matrix::scalar(dot(self.value(a).data(), self.value(b).data()));
        let rg = self.requires(a) || self.requires(b);
        self.push(value, Op::Inner(a, b), rg, "inner_product")
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).relu();
        let rg = self.requires(a);
        self.push(value, Op::Relu(a), rg, "relu")
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(sigmoid);
        let rg = self.requires(a);
        self.push(value, Op::Sigmoid(a), rg, "sigmoid")
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Result<Var> {
        let value = self.value(a).scale(k);
        let rg = self.requires(a);
        self.push(value, Op::Scale(a, k), rg, "scale")
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let value = Matrix::scalar(self.value(a).data().iter().sum());
        let rg = self.requires(a);
        self.push(value, Op::Sum(a), rg, "sum")
    }

    /// Same value as `a`, but no gradient flows back through it.
    pub fn stop_gradient(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).clone();
        self.push(value, Op::StopGradient, false, "stop_gradient")
    }

    /// Propagates d`loss`/d`x` into the accumulator of every parameter `x`
    /// that `loss` depends on.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let shape = self.value(loss).shape();
        if shape != (1, 1) {
            return Err(Error::NonScalarLoss(shape));
        }
        if !self.requires(loss) {
            return Ok(());
        }
        let mut adj: Vec<Option<Matrix>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(Matrix::scalar(1.0));
        for i in (0..=loss.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            let node = &self.nodes[i];
            let send = |v: Var, contribution: Matrix, adj: &mut Vec<Option<Matrix>>| {
                if !self.nodes[v.0].requires_grad {
                    return;
                }
                match &mut adj[v.0] {
                    Some(acc) => acc.add_assign(&contribution),
                    slot => *slot = Some(contribution),
                }
            };
            match &node.op {
                Op::Leaf => {
                    if !g.is_finite() {
                        return Err(Error::NonFinite("backward"));
                    }
                    if let Some(acc) = self.grads[i].as_mut() {
                        acc.add_assign(&g);
                    }
                }
                Op::StopGradient => {}
                Op::MatMul(a, b) => {
                    let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    if self.nodes[a.0].requires_grad {
                        send(*a, g.matmul_nt(vb)?, &mut adj);
                    }
                    if self.nodes[b.0].requires_grad {
                        send(*b, va.matmul_tn(&g)?, &mut adj);
                    }
                }
                Op::Add(a, b) => {
                    send(*a, g.clone(), &mut adj);
                    send(*b, g, &mut adj);
                }
                Op::Sub(a, b) => {
                    send(*a, g.clone(), &mut adj);
                    send(*b, g.scale(-1.0), &mut adj);
                }
                Op::MulElem(a, b) => {
                    let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let ga = elementwise(&g, vb, |g, y| g * y);
                    let gb = elementwise(&g, va, |g, x| g * x);
                    send(*a, ga, &mut adj);
                    send(*b, gb, &mut adj);
                }
                Op::Transpose(a) => send(*a, g.transpose(), &mut adj),
                Op::ConcatRows(parts) => {
                    let cols = g.cols();
                    let mut offset = 0;
                    for p in parts {
                        let rows = self.nodes[p.0].value.rows();
                        let slice = g.data()[offset * cols..(offset + rows) * cols].to_vec();
                        send(*p, Matrix::from_vec(rows, cols, slice)?, &mut adj);
                        offset += rows;
                    }
                }
                Op::MeanRows(a) => {
                    let rows = self.nodes[a.0].value.rows();
                    let share = g.scale(1.0 / rows as f64);
                    let mut data = Vec::with_capacity(rows * g.cols());
                    for _ in 0..rows {
                        data.extend_from_slice(share.data());
                    }
                    send(*a, Matrix::from_vec(rows, g.cols(), data)?, &mut adj);
                }
                Op::GatherRows(src, indices) => {
                    if self.nodes[src.0].requires_grad {
                        let (rows, cols) = self.nodes[src.0].value.shape();
                        let acc = adj[src.0].get_or_insert_with(|| Matrix::zeros(rows, cols));
                        for (i, &r) in indices.iter().enumerate() {
                            for (d, s) in acc.data_mut()[r * cols..(r + 1) * cols]
                                .iter_mut()
                                .zip(g.row(i))
                            {
                                *d += s;
                            }
                        }
                    }
                }
                Op::Inner(a, b) => {
                    let k = g.item();
                    let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let (ga, gb) = (vb.scale(k), va.scale(k));
                    send(*a, ga, &mut adj);
                    send(*b, gb, &mut adj);
                }
                Op::Relu(a) => {
                    let x = &self.nodes[a.0].value;
                    send(
                        *a,
                        elementwise(&g, x, |g, x| if x > 0.0 { g } else { 0.0 }),
                        &mut adj,
                    );
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    send(*a, elementwise(&g, y, |g, y| g * y * (1.0 - y)), &mut adj);
                }
                Op::Scale(a, k) => send(*a, g.scale(*k), &mut adj),
                Op::Sum(a) => {
                    let (r, c) = self.nodes[a.0].value.shape();
                    send(*a, Matrix::filled(r, c, g.item()), &mut adj);
                }
            }
        }
        Ok(())
    }
}

fn elementwise(a: &Matrix, b: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| f(x, y))
        .collect();
    Matrix::from_vec(a.rows(), a.cols(), data).expect("same shape")
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, data: &[f64]) -> Matrix {
        Matrix::from_vec(rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn relu_and_sigmoid_values() {
        let mut t = Tape::new();
        let x = t.param(m(1, 3, &[-1.0, 0.0, 2.0])).unwrap();
        let r = t.relu(x).unwrap();
        assert_eq!(t.value(r).data(), &[0.0, 0.0, 2.0]);
        let z = t.constant(Matrix::scalar(0.0)).unwrap();
        let s = t.sigmoid(z).unwrap();
        assert_eq!(t.value(s).item(), 0.5);
        let loss = t.sum(r).unwrap();
        t.backward(loss).unwrap();
        // Subgradient 0 at exactly 0.
        assert_eq!(t.grad(x).unwrap().data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn add_zero_is_identity() {
        let mut t = Tape::new();
        let x = t.constant(m(2, 2, &[1.0, -2.0, 3.5, 0.25])).unwrap();
        let z = t.constant(Matrix::zeros(2, 2)).unwrap();
        let y = t.add(x, z).unwrap();
        assert_eq!(t.value(y), t.value(x));
    }

    #[test]
    fn inner_product_gradient_is_other_operand() {
        let mut t = Tape::new();
        let a = t.param(m(3, 1, &[1.0, 2.0, 3.0])).unwrap();
        let b = t.constant(m(3, 1, &[-4.0, 0.5, 7.0])).unwrap();
        let p = t.inner_product(a, b).unwrap();
        t.backward(p).unwrap();
        assert_eq!(t.grad(a).unwrap(), t.value(b));
    }

    #[test]
    fn sum_of_matvec_gradient_is_outer_structure() {
        let mut t = Tape::new();
        let w = t.param(m(2, 3, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6])).unwrap();
        let x = t.constant(m(3, 1, &[1.0, -2.0, 5.0])).unwrap();
        let y = t.matmul(w, x).unwrap();
        let loss = t.sum(y).unwrap();
        t.backward(loss).unwrap();
        assert_eq!(t.grad(w).unwrap().data(), &[1.0, -2.0, 5.0, 1.0, -2.0, 5.0]);
    }

    #[test]
    fn second_backward_doubles_gradients() {
        let mut t = Tape::new();
        let w = t.param(m(2, 2, &[0.3, -0.1, 0.8, 0.05])).unwrap();
        let x = t.constant(m(2, 1, &[1.5, -0.5])).unwrap();
        let y = t.matmul(w, x).unwrap();
        let s = t.sigmoid(y).unwrap();
        let loss = t.sum(s).unwrap();
        t.backward(loss).unwrap();
        let once = t.grad(w).unwrap().clone();
        t.backward(loss).unwrap();
        assert_eq!(t.grad(w).unwrap(), &once.scale(2.0));
        t.zero_grad();
        assert!(t.grad(w).unwrap().data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut t = Tape::new();
        let w = t.param(Matrix::zeros(2, 1)).unwrap();
        assert!(matches!(t.backward(w), Err(Error::NonScalarLoss((2, 1)))));
    }

    #[test]
    fn shape_errors_name_the_op() {
        let mut t = Tape::new();
        let a = t.constant(Matrix::zeros(2, 3)).unwrap();
        let b = t.constant(Matrix::zeros(2, 1)).unwrap();
        let err = t.matmul(a, b).unwrap_err().to_string();
        assert!(
            err.contains("matmul") && err.contains("(2, 3)") && err.contains("(2, 1)"),
            "{err}"
        );
        assert!(t.add(a, b).unwrap_err().to_string().contains("add"));
        let c = t.constant(Matrix::zeros(1, 2)).unwrap();
        assert!(t.concat_rows(&[a, c]).is_err());
    }

    #[test]
    fn non_finite_values_raise() {
        let mut t = Tape::new();
        assert!(t.constant(Matrix::scalar(f64::NAN)).is_err());
        let a = t.constant(Matrix::scalar(1e300)).unwrap();
        assert!(matches!(
            t.mul_elem(a, a),
            Err(Error::NonFinite("mul_elem"))
        ));
    }

    #[test]
    fn stop_gradient_blocks_flow() {
        let mut t = Tape::new();
        let w = t.param(m(1, 2, &[1.0, 2.0])).unwrap();
        let s = t.stop_gradient(w).unwrap();
        let y = t.mul_elem(s, w).unwrap();
        let loss = t.sum(y).unwrap();
        t.backward(loss).unwrap();
        // Only the direct path counts: d/dw (c * w) = c.
        assert_eq!(t.grad(w).unwrap().data(), &[1.0, 2.0]);
    }

    #[test]
    fn concat_and_mean_route_gradients() {
        let mut t = Tape::new();
        let a = t.param(m(2, 2, &[1.0, 2.0, 3.0, 4.0])).unwrap();
        let b = t.param(m(1, 2, &[5.0, 6.0])).unwrap();
        let c = t.concat_rows(&[a, b]).unwrap();
        let picked = t.gather_rows(c, &[2, 0, 2]).unwrap();
        assert_eq!(t.value(picked).data(), &[5.0, 6.0, 1.0, 2.0, 5.0, 6.0]);
        assert_eq!(t.value(c).shape(), (3, 2));
        let mu = t.mean_rows(c).unwrap();
        assert_eq!(t.value(mu).data(), &[3.0, 4.0]);
        let w = t.constant(m(1, 2, &[3.0, -3.0])).unwrap();
        let loss = t.inner_product(mu, w).unwrap();
        let first = t.sum(picked).unwrap();
        let total = t.add(loss, first).unwrap();
        t.backward(total).unwrap();
        assert_eq!(t.grad(a).unwrap().data(), &[2.0, 0.0, 1.0, -1.0]);
        assert_eq!(t.grad(b).unwrap().data(), &[3.0, 1.0]);
    }
}
