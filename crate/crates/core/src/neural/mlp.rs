use ndarray::{Array1, Array2, ArrayD, ArrayView2, ArrayViewD, ArrayViewMutD, Axis, NdFloat};

use super::cst;
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            "identity" | "none" => Some(Activation::Identity),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    fn apply<F: NdFloat>(self, z: &Array2<F>) -> Array2<F> {
        match self {
            Activation::Relu => z.mapv(|v| if v > F::zero() { v } else { F::zero() }),
            Activation::Tanh => z.mapv(F::tanh),
            Activation::Identity => z.clone(),
        }
    }

    /// Derivative evaluated from the pre-activation `z` (and output `a`).
    fn derivative<F: NdFloat>(self, z: F, a: F) -> F {
        match self {
            Activation::Relu => {
                if z > F::zero() {
                    F::one()
                } else {
                    F::zero()
                }
            }
            Activation::Tanh => F::one() - a * a,
            Activation::Identity => F::one(),
        }
    }
}

/// Forward-pass mode. Dropout only applies in training.
pub enum Mode<'a> {
    Train { dropout: f64, rng: &'a mut RngStream },
    Eval,
}

impl Mode<'_> {
    pub fn reborrow(&mut self) -> Mode<'_> {
        match self {
            Mode::Train { dropout, rng } => Mode::Train { dropout: *dropout, rng },
            Mode::Eval => Mode::Eval,
        }
    }
}

/// Matrix with entries uniform in `±sqrt(6 / (rows + cols))`.
pub fn xavier_init<F: NdFloat>(rows: usize, cols: usize, rng: &mut RngStream) -> Array2<F> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || cst::<F>((rng.unit_f64() * 2.0 - 1.0) * bound))
}

/// `act(x·w1 + b1) · w2 + b2`
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams<F> {
    pub w1: Array2<F>,
    pub b1: Array1<F>,
    pub w2: Array2<F>,
    pub b2: Array1<F>,
}

pub type MlpGrads<F> = MlpParams<F>;

impl<F: NdFloat> MlpParams<F> {
    /// Xavier-uniform weights, zero biases.
    pub fn xavier(in_dim: usize, hidden: usize, out_dim: usize, rng: &mut RngStream) -> Self {
        let w1 = xavier_init(in_dim, hidden, rng);
        let w2 = xavier_init(hidden, out_dim, rng);
        Self { w1, b1: Array1::zeros(hidden), w2, b2: Array1::zeros(out_dim) }
    }

    pub fn zeros(in_dim: usize, hidden: usize, out_dim: usize) -> Self {
        Self {
            w1: Array2::zeros((in_dim, hidden)),
            b1: Array1::zeros(hidden),
            w2: Array2::zeros((hidden, out_dim)),
            b2: Array1::zeros(out_dim),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn hidden(&self) -> usize {
        self.w1.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.w2.ncols()
    }

    pub fn num_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn views(&self) -> [ArrayViewD<'_, F>; 4] {
        [self.w1.view().into_dyn(), self.b1.view().into_dyn(), self.w2.view().into_dyn(), self.b2.view().into_dyn()]
    }

    pub fn views_mut(&mut self) -> [ArrayViewMutD<'_, F>; 4] {
        [
            self.w1.view_mut().into_dyn(),
            self.b1.view_mut().into_dyn(),
            self.w2.view_mut().into_dyn(),
            self.b2.view_mut().into_dyn(),
        ]
    }

    pub fn shapes(&self) -> Vec<Vec<usize>> {
        self.views().iter().map(|v| v.shape().to_vec()).collect()
    }

    pub fn scale(&mut self, a: F) {
        for mut v in self.views_mut() {
            v.mapv_inplace(|x| x * a);
        }
    }

    /// Tensors widened to `f64`, named `<prefix>.w1` etc., for checkpoints.
    pub fn named_tensors(&self, prefix: &str) -> Vec<(String, ArrayD<f64>)> {
        ["w1", "b1", "w2", "b2"]
            .iter()
            .zip(self.views())
            .map(|(n, v)| (format!("{prefix}.{n}"), v.mapv(|x| x.to_f64().unwrap())))
            .collect()
    }
}

/// Activations retained by a forward pass for the matching backward pass.
#[derive(Clone, Debug)]
pub struct MlpCache<F> {
    x: Array2<F>,
    pre: Array2<F>,
    act: Array2<F>,
    /// Inverted-dropout multipliers (0 or 1/(1-p)); `None` when inactive.
    mask: Option<Array2<F>>,
    hidden_out: Array2<F>,
    activation: Activation,
}

impl<F> MlpCache<F> {
    pub fn batch(&self) -> usize {
        self.x.nrows()
    }

    /// Bytes held by the cached activations.
    pub fn bytes(&self) -> usize {
        let n = self.x.len() + self.pre.len() + self.act.len() + self.hidden_out.len()
            + self.mask.as_ref().map_or(0, |m| m.len());
        n * std::mem::size_of::<F>()
    }
}

pub fn mlp_forward<F: NdFloat>(
    p: &MlpParams<F>,
    x: ArrayView2<'_, F>,
    activation: Activation,
    mode: Mode<'_>,
) -> Result<(Array2<F>, MlpCache<F>)> {
    if x.ncols() != p.in_dim() {
        return Err(Error::Shape(format!("input has {} columns, MLP expects {}", x.ncols(), p.in_dim())));
    }
    let pre = x.dot(&p.w1) + &p.b1;
    let act = activation.apply(&pre);
    let mask = match mode {
        Mode::Train { dropout, rng } if dropout > 0.0 => {
            if dropout >= 1.0 {
                return Err(Error::InvalidArgument(format!("dropout rate {dropout} must be below 1")));
            }
            let keep = cst::<F>(1.0 / (1.0 - dropout));
            Some(Array2::from_shape_simple_fn(act.raw_dim(), || {
                if rng.unit_f64() < dropout {
                    F::zero()
                } else {
                    keep
                }
            }))
        }
        _ => None,
    };
    let hidden_out = match &mask {
        Some(m) => &act * m,
        None => act.clone(),
    };
    let out = hidden_out.dot(&p.w2) + &p.b2;
    Ok((out, MlpCache { x: x.to_owned(), pre, act, mask, hidden_out, activation }))
}

/// Exact gradients of the forward map given `dout = ∂L/∂output`. The input
/// gradient is only formed when requested.
pub fn mlp_backward<F: NdFloat>(
    p: &MlpParams<F>,
    cache: &MlpCache<F>,
    dout: ArrayView2<'_, F>,
    want_input_grad: bool,
) -> Result<(MlpGrads<F>, Option<Array2<F>>)> {
    if dout.dim() != (cache.x.nrows(), p.out_dim()) || cache.pre.ncols() != p.hidden() || cache.x.ncols() != p.in_dim() {
        return Err(Error::Shape("backward cache does not match parameters or upstream gradient".into()));
    }
    let w2 = cache.hidden_out.t().dot(&dout);
    let b2 = dout.sum_axis(Axis(0));
    let mut dh = dout.dot(&p.w2.t());
    if let Some(m) = &cache.mask {
        dh *= m;
    }
    ndarray::Zip::from(&mut dh)
        .and(&cache.pre)
        .and(&cache.act)
        .for_each(|g, &z, &a| *g *= cache.activation.derivative(z, a));
    let w1 = cache.x.t().dot(&dh);
    let b1 = dh.sum_axis(Axis(0));
    let dx = want_input_grad.then(|| dh.dot(&p.w1.t()));
    Ok((MlpParams { w1, b1, w2, b2 }, dx))
}
