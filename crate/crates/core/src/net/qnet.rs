//! Branching dueling Q-network.
//!
//! Each count volume runs through its own feature path: a 1×1 lift to
//! `channels`, then a grouped 3×3 spatial kernel and a grouped 1×1 stimulus
//! kernel whose outputs are summed. Both paths are flattened, concatenated
//! and passed through the trunk (linear → layer norm → ReLU → dropout).
//! Three heads give `V(s)`, `A(s, a_l)` and `A(s, a_v)`, combined as
//! `Q = V + (A - mean A)` per branch.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use super::encode::{encode_states, NetInput};
use super::layers::{self, Grid2};
use super::params::{ParamId, ParamStore};
use super::{NetConfig, Real, StateEncoding};
use crate::episode::Action;
use crate::error::{Error, Result};
use crate::field::N_STIMULI;
use crate::state::TestState;

#[derive(Debug, Clone)]
struct PathIds {
    lift_w: ParamId,
    lift_b: ParamId,
    spatial_w: ParamId,
    spatial_b: ParamId,
    point_w: ParamId,
    point_b: ParamId,
}

#[derive(Debug, Clone)]
struct TrunkIds {
    w: ParamId,
    b: ParamId,
    gamma: ParamId,
    beta: ParamId,
}

#[derive(Debug, Clone)]
struct HeadIds {
    w: ParamId,
    b: ParamId,
}

#[derive(Debug, Clone)]
struct Layout {
    paths: Vec<PathIds>,
    trunk: Vec<TrunkIds>,
    value: HeadIds,
    location: HeadIds,
    stimulus: HeadIds,
}

/// Outputs for a batch: one row per state.
#[derive(Debug, Clone, PartialEq)]
pub struct QValues<T> {
    pub value: Array1<T>,
    pub adv_location: Array2<T>,
    pub adv_stimulus: Array2<T>,
    pub q_location: Array2<T>,
    pub q_stimulus: Array2<T>,
}

struct PathTape<T> {
    input: Array2<T>,
    pre_lift: Array2<T>,
    lifted: Array2<T>,
    pre_out: Array2<T>,
}

struct TrunkTape<T> {
    input: Array2<T>,
    xhat: Array2<T>,
    inv_std: Array1<T>,
    normed: Array2<T>,
    dropout: Option<Array2<T>>,
}

/// Intermediate activations kept for [`QNetwork::backward`].
pub struct Tape<T> {
    paths: Vec<PathTape<T>>,
    trunk: Vec<TrunkTape<T>>,
    hidden: Array2<T>,
}

#[derive(Debug, Clone)]
pub struct QNetwork<T> {
    config: NetConfig,
    layout: Layout,
    params: ParamStore<T>,
}

fn layout_for<T: Real>(cfg: &NetConfig) -> (Layout, ParamStore<T>) {
    let mut ps = ParamStore::empty();
    let f = &cfg.features;
    let c = f.channels;
    let mut paths = Vec::new();
    if f.encoding == StateEncoding::Counts3d {
        for name in ["seen", "not_seen"] {
            paths.push(PathIds {
                lift_w: ps.push(format!("{name}.lift.w"), vec![c, N_STIMULI]),
                lift_b: ps.push(format!("{name}.lift.b"), vec![c]),
                spatial_w: ps.push(format!("{name}.spatial.w"), vec![c, f.spatial_group_width() * 9]),
                spatial_b: ps.push(format!("{name}.spatial.b"), vec![c]),
                point_w: ps.push(format!("{name}.pointwise.w"), vec![c, f.pointwise_group_width()]),
                point_b: ps.push(format!("{name}.pointwise.b"), vec![c]),
            });
        }
    }
    let mut trunk = Vec::new();
    let mut width = cfg.feature_len();
    for (i, &out) in cfg.trunk.iter().enumerate() {
        trunk.push(TrunkIds {
            w: ps.push(format!("trunk{i}.w"), vec![width, out]),
            b: ps.push(format!("trunk{i}.b"), vec![out]),
            gamma: ps.push(format!("trunk{i}.ln.gamma"), vec![out]),
            beta: ps.push(format!("trunk{i}.ln.beta"), vec![out]),
        });
        width = out;
    }
    let mut head = |name: &str, out: usize| HeadIds {
        w: ps.push(format!("head.{name}.w"), vec![width, out]),
        b: ps.push(format!("head.{name}.b"), vec![out]),
    };
    let value = head("value", 1);
    let location = head("location", cfg.locations);
    let stimulus = head("stimulus", cfg.stimuli);
    (Layout { paths, trunk, value, location, stimulus }, ps)
}

/// Index of the largest allowed entry, lowest index on ties.
pub fn masked_argmax<T: Real>(row: ArrayView1<T>, allowed: impl Fn(usize) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in row.iter().enumerate() {
        if allowed(i) && best.is_none_or(|b| v > row[b]) {
            best = Some(i);
        }
    }
    best
}

impl<T: Real> QNetwork<T> {
    /// Fresh network: He-uniform weights, zero biases, unit layer-norm gain.
    pub fn new(config: NetConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let (layout, mut params) = layout_for::<T>(&config);
        for id in params.ids().collect::<Vec<_>>() {
            let spec = params.specs()[id.0].clone();
            if spec.name.ends_with(".gamma") {
                params.tensor_mut(id).fill(T::one());
            } else if spec.name.ends_with(".w") {
                let fan_in = if spec.name.starts_with("trunk") || spec.name.starts_with("head") {
                    spec.shape[0]
                } else {
                    spec.shape[1]
                };
                let gain = if spec.name.starts_with("head") { 1.0 } else { 6.0 };
                let bound = (gain / fan_in as f64).sqrt();
                params.tensor_mut(id).mapv_inplace(|_| T::from(rng.gen_range(-bound..=bound)).unwrap());
            }
        }
        Ok(Self { config, layout, params })
    }

    /// Wraps existing parameters after checking every tensor shape.
    pub fn from_params(config: NetConfig, params: ParamStore<T>) -> Result<Self> {
        config.validate()?;
        let (layout, expected) = layout_for::<T>(&config);
        if expected.specs() != params.specs() {
            let detail = expected
                .specs()
                .iter()
                .zip(params.specs())
                .find(|(a, b)| a != b)
                .map(|(a, b)| format!("expected {} {:?}, found {} {:?}", a.name, a.shape, b.name, b.shape))
                .unwrap_or_else(|| {
                    format!("expected {} tensors, found {}", expected.len(), params.len())
                });
            return Err(Error::Shape(detail));
        }
        if !params.is_finite() {
            return Err(Error::Numerical("non-finite parameter".into()));
        }
        Ok(Self { config, layout, params })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn cast<U: Real>(&self) -> QNetwork<U> {
        QNetwork { config: self.config.clone(), layout: self.layout.clone(), params: self.params.cast() }
    }

    fn grid(&self) -> Grid2 {
        Grid2 { rows: self.config.rows, cols: self.config.cols }
    }

    /// Evaluation-mode forward pass (no dropout).
    pub fn forward(&self, input: &NetInput<T>) -> Result<QValues<T>> {
        Ok(self.forward_train::<crate::rng::Rng>(input, None)?.0)
    }

    /// Forward pass keeping activations for backprop. Dropout is active
    /// only when an rng is supplied.
    pub fn forward_train<R: Rng>(
        &self,
        input: &NetInput<T>,
        mut dropout: Option<&mut R>,
    ) -> Result<(QValues<T>, Tape<T>)> {
        let p = self.config.pixels();
        let batch = input.batch();
        let (features, paths) = match (input, self.config.features.encoding) {
            (NetInput::Counts { seen, not_seen, .. }, StateEncoding::Counts3d) => {
                for v in [seen, not_seen] {
                    if v.dim() != (N_STIMULI, batch * p) {
                        return Err(Error::Shape(format!("count volume {:?}", v.dim())));
                    }
                }
                let c = self.config.features.channels;
                let mut features = Array2::zeros((batch, 2 * c * p));
                let mut tapes = Vec::with_capacity(2);
                for (k, (ids, x)) in self.layout.paths.iter().zip([seen, not_seen]).enumerate() {
                    let tape = self.path_forward(ids, x.clone());
                    let off = k * c * p;
                    for b in 0..batch {
                        for ch in 0..c {
                            let src = tape.pre_out.slice(s![ch, b * p..(b + 1) * p]);
                            let mut dst = features.slice_mut(s![b, off + ch * p..off + (ch + 1) * p]);
                            dst.zip_mut_with(&src, |d, &v| *d = v.max(T::zero()));
                        }
                    }
                    tapes.push(tape);
                }
                (features, tapes)
            }
            (NetInput::Predictions(m), StateEncoding::Predictions2d) => {
                if m.ncols() != p {
                    return Err(Error::Shape(format!("prediction map has {} columns", m.ncols())));
                }
                (m.clone(), Vec::new())
            }
            _ => return Err(Error::Shape("input encoding does not match network".into())),
        };

        let eps = T::from(self.config.layer_norm_eps).unwrap();
        let keep = 1.0 - self.config.dropout;
        let mut h = features;
        let mut trunk = Vec::with_capacity(self.layout.trunk.len());
        for ids in &self.layout.trunk {
            let y = layers::linear_forward(h.view(), self.params.matrix(ids.w), self.params.vector(ids.b));
            let ln = layers::layer_norm_forward(
                y.view(),
                self.params.vector(ids.gamma),
                self.params.vector(ids.beta),
                eps,
            );
            let mut out = layers::relu(&ln.y);
            let mask = match dropout.as_deref_mut() {
                Some(rng) if self.config.dropout > 0.0 => {
                    let scale = T::from(1.0 / keep).unwrap();
                    let m = Array2::from_shape_fn(out.dim(), |_| {
                        if rng.gen_bool(keep) { scale } else { T::zero() }
                    });
                    out = &out * &m;
                    Some(m)
                }
                _ => None,
            };
            trunk.push(TrunkTape { input: h, xhat: ln.xhat, inv_std: ln.inv_std, normed: ln.y, dropout: mask });
            h = out;
        }

        let head = |ids: &HeadIds| layers::linear_forward(h.view(), self.params.matrix(ids.w), self.params.vector(ids.b));
        let value = head(&self.layout.value).column(0).to_owned();
        let adv_location = head(&self.layout.location);
        let adv_stimulus = head(&self.layout.stimulus);
        let q_location = layers::dueling_combine(value.view(), adv_location.view());
        let q_stimulus = layers::dueling_combine(value.view(), adv_stimulus.view());
        if q_location.iter().chain(q_stimulus.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite Q-value; parameters are corrupt".into()));
        }
        Ok((
            QValues { value, adv_location, adv_stimulus, q_location, q_stimulus },
            Tape { paths, trunk, hidden: h },
        ))
    }

    fn path_forward(&self, ids: &PathIds, input: Array2<T>) -> PathTape<T> {
        let f = &self.config.features;
        let pre_lift = layers::pointwise_forward(self.params.matrix(ids.lift_w), self.params.vector(ids.lift_b), input.view(), 1);
        let lifted = layers::relu(&pre_lift);
        let mut pre_out = layers::conv3x3_forward(
            self.params.matrix(ids.spatial_w),
            self.params.vector(ids.spatial_b),
            lifted.view(),
            f.spatial_groups,
            self.grid(),
        );
        pre_out += &layers::pointwise_forward(
            self.params.matrix(ids.point_w),
            self.params.vector(ids.point_b),
            lifted.view(),
            f.pointwise_groups,
        );
        PathTape { input, pre_lift, lifted, pre_out }
    }

    /// Exact parameter gradients of a scalar loss, given its gradients with
    /// respect to the two Q outputs of the taped forward pass.
    pub fn backward(&self, tape: &Tape<T>, dq_location: ArrayView2<T>, dq_stimulus: ArrayView2<T>) -> ParamStore<T> {
        let mut grads = self.params.zeros_like();
        let (dv_l, da_l) = layers::dueling_backward(dq_location);
        let (dv_s, da_s) = layers::dueling_backward(dq_stimulus);
        let dv = (&dv_l + &dv_s).insert_axis(Axis(1));

        let h = tape.hidden.view();
        let mut dh = Array2::zeros(tape.hidden.dim());
        for (ids, dout) in [(&self.layout.value, dv), (&self.layout.location, da_l), (&self.layout.stimulus, da_s)] {
            let (dw, db, dx) = layers::linear_backward(h, self.params.matrix(ids.w), dout.view());
            grads.matrix_mut(ids.w).assign(&dw);
            grads.vector_mut(ids.b).assign(&db);
            dh += &dx;
        }

        for (ids, t) in self.layout.trunk.iter().zip(&tape.trunk).rev() {
            if let Some(mask) = &t.dropout {
                dh = &dh * mask;
            }
            layers::relu_backward(&t.normed, &mut dh);
            let (dgamma, dbeta, dy) =
                layers::layer_norm_backward(t.xhat.view(), t.inv_std.view(), self.params.vector(ids.gamma), dh.view());
            grads.vector_mut(ids.gamma).assign(&dgamma);
            grads.vector_mut(ids.beta).assign(&dbeta);
            let (dw, db, dx) = layers::linear_backward(t.input.view(), self.params.matrix(ids.w), dy.view());
            grads.matrix_mut(ids.w).assign(&dw);
            grads.vector_mut(ids.b).assign(&db);
            dh = dx;
        }

        if !tape.paths.is_empty() {
            let c = self.config.features.channels;
            let p = self.config.pixels();
            let batch = dh.nrows();
            for (k, (ids, t)) in self.layout.paths.iter().zip(&tape.paths).enumerate() {
                let off = k * c * p;
                let mut dpre = Array2::zeros(t.pre_out.dim());
                for b in 0..batch {
                    for ch in 0..c {
                        let src = dh.slice(s![b, off + ch * p..off + (ch + 1) * p]);
                        dpre.slice_mut(s![ch, b * p..(b + 1) * p]).assign(&src);
                    }
                }
                layers::relu_backward(&t.pre_out, &mut dpre);
                self.path_backward(ids, t, dpre, &mut grads);
            }
        }
        grads
    }

    fn path_backward(&self, ids: &PathIds, t: &PathTape<T>, dpre: Array2<T>, grads: &mut ParamStore<T>) {
        let f = &self.config.features;
        let (dw, db, dx) =
            layers::conv3x3_backward(self.params.matrix(ids.spatial_w), t.lifted.view(), dpre.view(), f.spatial_groups, self.grid());
        grads.matrix_mut(ids.spatial_w).assign(&dw);
        grads.vector_mut(ids.spatial_b).assign(&db);
        let mut dlifted = dx;
        let (dw, db, dx) =
            layers::pointwise_backward(self.params.matrix(ids.point_w), t.lifted.view(), dpre.view(), f.pointwise_groups, true);
        grads.matrix_mut(ids.point_w).assign(&dw);
        grads.vector_mut(ids.point_b).assign(&db);
        dlifted += &dx.expect("requested");
        layers::relu_backward(&t.pre_lift, &mut dlifted);
        let (dw, db, _) = layers::pointwise_backward(self.params.matrix(ids.lift_w), t.input.view(), dlifted.view(), 1, false);
        grads.matrix_mut(ids.lift_w).assign(&dw);
        grads.vector_mut(ids.lift_b).assign(&db);
    }

    /// Flattened state features (the trunk input) for a batch.
    pub fn extract_features(&self, input: &NetInput<T>) -> Result<Array2<T>> {
        let (_, tape) = self.forward_train::<crate::rng::Rng>(input, None)?;
        Ok(match tape.trunk.into_iter().next() {
            Some(t) => t.input,
            None => unreachable!("trunk is never empty"),
        })
    }

    pub fn q_values(&self, states: &[&TestState]) -> Result<QValues<T>> {
        self.forward(&encode_states(states, &self.config)?)
    }

    /// Greedy `(location, stimulus)`: best untested location, best stimulus.
    pub fn greedy_action(&self, state: &TestState) -> Result<Action> {
        Ok(self.greedy_actions(&[state])?.remove(0))
    }

    pub fn greedy_actions(&self, states: &[&TestState]) -> Result<Vec<Action>> {
        if states.is_empty() {
            return Ok(Vec::new());
        }
        let q = self.q_values(states)?;
        states
            .iter()
            .enumerate()
            .map(|(b, s)| {
                let location = masked_argmax(q.q_location.row(b), |l| !s.is_tested(l))
                    .ok_or_else(|| Error::Protocol("no untested location left".into()))?;
                let stimulus = masked_argmax(q.q_stimulus.row(b), |_| true).expect("non-empty") as u8;
                Ok(Action { location, stimulus })
            })
            .collect()
    }
}
