use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{Error, Result};
use crate::kg::KnowledgeGraph;
use crate::numerics::{axpy, elu, elu_grad, DenseMatrix, Real};

use super::TrainConfig;

/// Two-layer perceptron `W2 · elu(W1 x + b1) + b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<F> {
    pub w1: DenseMatrix<F>,
    pub b1: DenseMatrix<F>,
    pub w2: DenseMatrix<F>,
    pub b2: DenseMatrix<F>,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache<F> {
    pub pre: Vec<F>,
    pub hidden: Vec<F>,
    pub out: Vec<F>,
}

impl<F: Real> Mlp<F> {
    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        Mlp {
            w1: DenseMatrix::zeros(hidden, input),
            b1: DenseMatrix::zeros(1, hidden),
            w2: DenseMatrix::zeros(output, hidden),
            b2: DenseMatrix::zeros(1, output),
        }
    }

    /// Weights and biases uniform in `±1/√fan_in`.
    pub fn init<R: Rng + ?Sized>(input: usize, hidden: usize, output: usize, rng: &mut R) -> Self {
        let mut m = Mlp::zeros(input, hidden, output);
        let u1 = Uniform::new_inclusive(-1.0 / (input as f64).sqrt(), 1.0 / (input as f64).sqrt())
            .expect("finite bounds");
        let u2 =
            Uniform::new_inclusive(-1.0 / (hidden as f64).sqrt(), 1.0 / (hidden as f64).sqrt())
                .expect("finite bounds");
        for x in m.w1.as_mut_slice().iter_mut().chain(m.b1.as_mut_slice()) {
            *x = F::c(u1.sample(rng));
        }
        for x in m.w2.as_mut_slice().iter_mut().chain(m.b2.as_mut_slice()) {
            *x = F::c(u2.sample(rng));
        }
        m
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.rows()
    }

    pub fn forward(&self, x: &[F]) -> MlpCache<F> {
        let mut pre = self.w1.matvec(x);
        for (p, &b) in pre.iter_mut().zip(self.b1.as_slice()) {
            *p += b;
        }
        let hidden: Vec<F> = pre.iter().map(|&v| elu(v)).collect();
        let mut out = self.w2.matvec(&hidden);
        for (o, &b) in out.iter_mut().zip(self.b2.as_slice()) {
            *o += b;
        }
        MlpCache { pre, hidden, out }
    }

    /// Accumulate parameter gradients into `grads` and return the gradient
    /// with respect to the input `x`.
    pub fn backward(
        &self,
        x: &[F],
        cache: &MlpCache<F>,
        g_out: &[F],
        grads: &mut Mlp<F>,
    ) -> Vec<F> {
        grads.w2.add_outer(F::one(), g_out, &cache.hidden);
        axpy(F::one(), g_out, grads.b2.as_mut_slice());
        let mut g_pre = self.w2.matvec_t(g_out);
        for (g, &p) in g_pre.iter_mut().zip(&cache.pre) {
            *g *= elu_grad(p);
        }
        grads.w1.add_outer(F::one(), &g_pre, x);
        axpy(F::one(), &g_pre, grads.b1.as_mut_slice());
        self.w1.matvec_t(&g_pre)
    }

    fn tensors(&self) -> [&DenseMatrix<F>; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    fn tensors_mut(&mut self) -> [&mut DenseMatrix<F>; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    fn cast<G: Real>(&self) -> Mlp<G> {
        Mlp {
            w1: self.w1.cast(),
            b1: self.b1.cast(),
            w2: self.w2.cast(),
            b2: self.b2.cast(),
        }
    }
}

/// Fixed textual embeddings, one row per vocabulary item. Never trained.
#[derive(Debug, Clone, PartialEq)]
pub struct TextTables<F> {
    pub entity: DenseMatrix<F>,
    pub relation: DenseMatrix<F>,
    pub type_: DenseMatrix<F>,
}

impl<F: Real> TextTables<F> {
    pub fn dim(&self) -> usize {
        self.entity.cols()
    }

    pub fn validate(&self, graph: &KnowledgeGraph) -> Result<()> {
        let d = self.dim();
        let checks = [
            ("entity", &self.entity, graph.num_entities()),
            ("relation", &self.relation, graph.num_relations()),
            ("type", &self.type_, graph.num_types()),
        ];
        for (kind, table, count) in checks {
            if table.rows() != count || table.cols() != d {
                return Err(Error::Shape(format!(
                    "{kind} text table is {}x{}, expected {count}x{d}",
                    table.rows(),
                    table.cols()
                )));
            }
        }
        Ok(())
    }

    pub fn cast<G: Real>(&self) -> TextTables<G> {
        TextTables {
            entity: self.entity.cast(),
            relation: self.relation.cast(),
            type_: self.type_.cast(),
        }
    }
}

/// Every learnable tensor of the aggregation model.
///
/// Gradients use the same struct, so [`SkaParams::tensors`] order is the
/// order shared by Adam, checkpoints and flat parameter vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SkaParams<F> {
    pub entity_struct: DenseMatrix<F>,
    pub relation_struct: DenseMatrix<F>,
    pub type_struct: DenseMatrix<F>,
    pub mlp_text: Option<Mlp<F>>,
    pub mlp_struct: Mlp<F>,
    /// `|T| x d`
    pub cls_weight: DenseMatrix<F>,
    /// `1 x |T|`
    pub cls_bias: DenseMatrix<F>,
}

impl<F: Real> SkaParams<F> {
    pub fn tensors(&self) -> Vec<&DenseMatrix<F>> {
        let mut v = vec![
            &self.entity_struct,
            &self.relation_struct,
            &self.type_struct,
        ];
        if let Some(m) = &self.mlp_text {
            v.extend(m.tensors());
        }
        v.extend(self.mlp_struct.tensors());
        v.push(&self.cls_weight);
        v.push(&self.cls_bias);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut DenseMatrix<F>> {
        let mut v = vec![
            &mut self.entity_struct,
            &mut self.relation_struct,
            &mut self.type_struct,
        ];
        if let Some(m) = &mut self.mlp_text {
            v.extend(m.tensors_mut());
        }
        v.extend(self.mlp_struct.tensors_mut());
        v.push(&mut self.cls_weight);
        v.push(&mut self.cls_bias);
        v
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.tensors().iter().map(|t| t.shape()).collect()
    }

    pub fn zeros_like(&self) -> Self {
        SkaParams {
            entity_struct: DenseMatrix::zeros(self.entity_struct.rows(), self.entity_struct.cols()),
            relation_struct: DenseMatrix::zeros(
                self.relation_struct.rows(),
                self.relation_struct.cols(),
            ),
            type_struct: DenseMatrix::zeros(self.type_struct.rows(), self.type_struct.cols()),
            mlp_text: self
                .mlp_text
                .as_ref()
                .map(|m| Mlp::zeros(m.input_dim(), m.w1.rows(), m.output_dim())),
            mlp_struct: Mlp::zeros(
                self.mlp_struct.input_dim(),
                self.mlp_struct.w1.rows(),
                self.mlp_struct.output_dim(),
            ),
            cls_weight: DenseMatrix::zeros(self.cls_weight.rows(), self.cls_weight.cols()),
            cls_bias: DenseMatrix::zeros(1, self.cls_bias.cols()),
        }
    }

    pub fn num_values(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<F> {
        let mut out = Vec::with_capacity(self.num_values());
        for t in self.tensors() {
            out.extend_from_slice(t.as_slice());
        }
        out
    }

    pub fn copy_from_flat(&mut self, flat: &[F]) -> Result<()> {
        if flat.len() != self.num_values() {
            return Err(Error::Shape(format!(
                "{} values for {} parameters",
                flat.len(),
                self.num_values()
            )));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.as_mut_slice().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    pub fn cast<G: Real>(&self) -> SkaParams<G> {
        SkaParams {
            entity_struct: self.entity_struct.cast(),
            relation_struct: self.relation_struct.cast(),
            type_struct: self.type_struct.cast(),
            mlp_text: self.mlp_text.as_ref().map(Mlp::cast),
            mlp_struct: self.mlp_struct.cast(),
            cls_weight: self.cls_weight.cast(),
            cls_bias: self.cls_bias.cast(),
        }
    }
}

/// Model state needed for inference: fixed text tables, learnable
/// parameters and the structural hyperparameters baked into the forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct SkaModel<F> {
    pub text: Option<TextTables<F>>,
    pub params: SkaParams<F>,
    pub temps: Vec<F>,
    pub hops: usize,
    pub norm_eps: F,
}

impl<F: Real> SkaModel<F> {
    /// Fresh model: structural tables `N(0, 0.02²)`, MLPs and classifier
    /// uniform in `±1/√fan_in`. Without text tables the model runs in
    /// structural-only mode.
    pub fn init<R: Rng + ?Sized>(
        graph: &KnowledgeGraph,
        text: Option<TextTables<F>>,
        cfg: &TrainConfig,
        rng: &mut R,
    ) -> Result<Self> {
        cfg.validate()?;
        if let Some(t) = &text {
            t.validate(graph)?;
        }
        let d = cfg.dim;
        let ds = cfg.struct_dim;
        let normal = Normal::new(0.0, 0.02).expect("valid std");
        let table = |rows: usize, rng: &mut R| {
            DenseMatrix::from_fn(rows, ds, |_, _| F::c(normal.sample(rng)))
        };
        let entity_struct = table(graph.num_entities(), rng);
        let relation_struct = table(graph.num_relations(), rng);
        let type_struct = table(graph.num_types(), rng);
        let mlp_text = text.as_ref().map(|t| Mlp::init(t.dim(), d, d, rng));
        let mlp_struct = Mlp::init(ds, d, d, rng);
        let bound = 1.0 / (d as f64).sqrt();
        let u = Uniform::new_inclusive(-bound, bound).expect("finite bounds");
        let num_types = graph.num_types();
        let cls_weight = DenseMatrix::from_fn(num_types, d, |_, _| F::c(u.sample(rng)));
        let cls_bias = DenseMatrix::from_fn(1, num_types, |_, _| F::c(u.sample(rng)));
        Ok(SkaModel {
            text,
            params: SkaParams {
                entity_struct,
                relation_struct,
                type_struct,
                mlp_text,
                mlp_struct,
                cls_weight,
                cls_bias,
            },
            temps: cfg.temps.iter().map(|&t| F::c(t)).collect(),
            hops: cfg.hops,
            norm_eps: F::c(cfg.norm_eps),
        })
    }

    pub fn dim(&self) -> usize {
        self.params.mlp_struct.output_dim()
    }

    pub fn num_types(&self) -> usize {
        self.params.cls_weight.rows()
    }

    pub fn cast<G: Real>(&self) -> SkaModel<G> {
        SkaModel {
            text: self.text.as_ref().map(TextTables::cast),
            params: self.params.cast(),
            temps: self.temps.iter().map(|&t| G::c(t.f64())).collect(),
            hops: self.hops,
            norm_eps: G::c(self.norm_eps.f64()),
        }
    }

    /// Check that the parameter shapes agree with `graph`.
    pub fn validate(&self, graph: &KnowledgeGraph) -> Result<()> {
        let p = &self.params;
        let d = self.dim();
        let ds = p.mlp_struct.input_dim();
        let expect = |name: &str, m: &DenseMatrix<F>, rows: usize, cols: usize| {
            if m.shape() != (rows, cols) {
                Err(Error::Shape(format!(
                    "{name} is {:?}, expected ({rows}, {cols})",
                    m.shape()
                )))
            } else {
                Ok(())
            }
        };
        expect("entity table", &p.entity_struct, graph.num_entities(), ds)?;
        expect(
            "relation table",
            &p.relation_struct,
            graph.num_relations(),
            ds,
        )?;
        expect("type table", &p.type_struct, graph.num_types(), ds)?;
        expect("classifier weight", &p.cls_weight, graph.num_types(), d)?;
        expect("classifier bias", &p.cls_bias, 1, graph.num_types())?;
        match (&self.text, &p.mlp_text) {
            (Some(t), Some(m)) => {
                t.validate(graph)?;
                if m.input_dim() != t.dim() || m.output_dim() != d {
                    return Err(Error::Shape("text MLP does not match text tables".into()));
                }
            }
            (None, None) => {}
            _ => {
                return Err(Error::Shape(
                    "text tables and text MLP must both be present".into(),
                ))
            }
        }
        if self.hops == 0 || self.temps.is_empty() {
            return Err(Error::Config(
                "model needs K >= 1 and at least one temperature".into(),
            ));
        }
        Ok(())
    }
}
