use super::tensor::Tensor;

/// A fixed, ordered collection of trainable tensors.
///
/// Gradients and optimizer moments are stored in values of the same type,
/// so the visiting order is the only link between a parameter and its
/// gradient.
pub trait Params: Clone {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Tensor));

    fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        self.visit("", &mut |name, t| out.push((name, t)));
        out
    }

    fn tensors(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        self.visit("", &mut |_, t| out.push(t));
        out
    }

    /// A value of the same shape with every entry zero.
    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.visit_mut(&mut |t| t.fill(0.0));
        z
    }

    fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

impl Params for Tensor {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        f(prefix.to_string(), self)
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Tensor)) {
        f(self)
    }
}

/// Joins a parent prefix and a field name with `.`.
pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{}.{}", prefix, name)
    }
}
