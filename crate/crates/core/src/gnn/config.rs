use super::ModelError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pooling {
    /// Column-wise max over node features, then one classification.
    MaxPool,
    /// Classify every node and average the per-node probabilities.
    SingleNode,
}

impl Pooling {
    pub fn as_str(self) -> &'static str {
        match self {
            Pooling::MaxPool => "maxpool",
            Pooling::SingleNode => "singlenode",
        }
    }
}

impl std::str::FromStr for Pooling {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "maxpool" => Ok(Self::MaxPool),
            "singlenode" => Ok(Self::SingleNode),
            _ => Err(format!("unknown pooling `{s}` (expected maxpool or singlenode)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    /// Point columns: 4 with the angle feature, 3 without.
    pub in_features: usize,
    pub encoder_widths: Vec<usize>,
    pub reduce_widths: Vec<usize>,
    pub gat_heads: usize,
    pub gat_head_widths: Vec<usize>,
    /// Hidden classifier layers; an output layer of `n_classes` follows.
    pub classifier_widths: Vec<usize>,
    pub n_classes: usize,
    pub pooling: Pooling,
    pub max_parts: usize,
    pub leaky_slope: f64,
    pub bn_momentum: f64,
    pub bn_eps: f64,
}

impl ModelConfig {
    /// Full-size architecture: encoder 16-16-32-256, reduction 256-128,
    /// four 8-head attention layers of 16-16-32-32 and classifier 128-256.
    pub fn standard(n_classes: usize) -> Self {
        Self {
            in_features: 4,
            encoder_widths: vec![16, 16, 32, 256],
            reduce_widths: vec![256, 128],
            gat_heads: 8,
            gat_head_widths: vec![16, 16, 32, 32],
            classifier_widths: vec![128, 256],
            n_classes,
            pooling: Pooling::MaxPool,
            max_parts: 32,
            leaky_slope: 0.2,
            bn_momentum: 0.1,
            bn_eps: 1e-5,
        }
    }

    /// Tiny architecture for exhaustive finite-difference checks.
    pub fn toy(n_classes: usize, pooling: Pooling) -> Self {
        Self {
            in_features: 4,
            encoder_widths: vec![2, 2, 2, 4],
            reduce_widths: vec![4, 2],
            gat_heads: 2,
            gat_head_widths: vec![2, 2, 2, 2],
            classifier_widths: vec![4, 4],
            n_classes,
            pooling,
            max_parts: 32,
            leaky_slope: 0.2,
            bn_momentum: 0.1,
            bn_eps: 1e-5,
        }
    }

    pub fn node_feature_width(&self) -> usize {
        *self.reduce_widths.last().expect("validated")
    }

    pub fn graph_feature_width(&self) -> usize {
        self.gat_heads * self.gat_head_widths.last().expect("validated")
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        let lists = [
            ("encoder_widths", &self.encoder_widths),
            ("reduce_widths", &self.reduce_widths),
            ("gat_head_widths", &self.gat_head_widths),
        ];
        for (name, l) in lists {
            if l.is_empty() || l.contains(&0) {
                return bad(&format!("{name} must be non-empty with widths >= 1"));
            }
        }
        if self.classifier_widths.contains(&0) {
            return bad("classifier widths must be >= 1");
        }
        if self.in_features == 0 || self.gat_heads == 0 || self.n_classes == 0 {
            return bad("in_features, gat_heads and n_classes must be >= 1");
        }
        if !(self.bn_momentum > 0.0 && self.bn_momentum <= 1.0) || !(self.bn_eps >= 0.0) {
            return bad("batch-norm momentum must be in (0, 1] and eps >= 0");
        }
        if !(self.leaky_slope.is_finite() && self.leaky_slope >= 0.0) {
            return bad("leaky slope must be finite and >= 0");
        }
        Ok(())
    }
}
