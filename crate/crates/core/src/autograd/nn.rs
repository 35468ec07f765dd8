use rand::Rng;

use super::{Graph, ParamId, ParamSet, Tensor, Var};
use crate::corpus::TokenId;

/// Single-layer LSTM. Gate order in the stacked weight: input, forget,
/// cell, output.
#[derive(Clone, Debug)]
pub struct Lstm {
    w: ParamId,
    b: ParamId,
    input: usize,
    hidden: usize,
}

impl Lstm {
    pub fn new<R: Rng>(ps: &mut ParamSet, name: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        let k = 1.0 / (hidden as f64).sqrt();
        let w = ps.add(format!("{name}.w"), Tensor::uniform(4 * hidden, input + hidden, k, rng));
        let mut bias = Tensor::zeros(4 * hidden, 1);
        bias.data[hidden..2 * hidden].iter_mut().for_each(|v| *v = 1.0);
        let b = ps.add(format!("{name}.b"), bias);
        Lstm { w, b, input, hidden }
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn input(&self) -> usize {
        self.input
    }

    pub fn step(&self, g: &mut Graph, x: Var, h: Var, c: Var) -> (Var, Var) {
        let n = self.hidden;
        let xh = g.concat(&[x, h]);
        let gates = g.affine(self.w, self.b, xh);
        let i = g.slice(gates, 0, n);
        let f = g.slice(gates, n, n);
        let u = g.slice(gates, 2 * n, n);
        let o = g.slice(gates, 3 * n, n);
        let i = g.sigmoid(i);
        let f = g.sigmoid(f);
        let u = g.tanh(u);
        let o = g.sigmoid(o);
        let keep = g.mul(f, c);
        let write = g.mul(i, u);
        let c = g.add(keep, write);
        let tc = g.tanh(c);
        let h = g.mul(o, tc);
        (h, c)
    }

    /// Hidden state after each input, left to right.
    pub fn run(&self, g: &mut Graph, xs: &[Var]) -> Vec<Var> {
        let mut h = g.zeros(self.hidden);
        let mut c = g.zeros(self.hidden);
        let mut out = Vec::with_capacity(xs.len());
        for &x in xs {
            (h, c) = self.step(g, x, h, c);
            out.push(h);
        }
        out
    }
}

/// Bidirectional states of an encoded sentence.
pub struct Encoded {
    /// Per position: forward state concatenated with backward state.
    pub states: Vec<Var>,
    /// Final forward state concatenated with final backward state.
    pub sentence: Var,
}

/// Embedding table followed by a bidirectional LSTM.
#[derive(Clone, Debug)]
pub struct BiLstm {
    emb: ParamId,
    fwd: Lstm,
    bwd: Lstm,
}

impl BiLstm {
    pub fn new<R: Rng>(
        ps: &mut ParamSet,
        name: &str,
        vocab: usize,
        emb_dim: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let emb = ps.add(format!("{name}.emb"), Tensor::uniform(vocab, emb_dim, 0.3, rng));
        let fwd = Lstm::new(ps, &format!("{name}.fwd"), emb_dim, hidden, rng);
        let bwd = Lstm::new(ps, &format!("{name}.bwd"), emb_dim, hidden, rng);
        BiLstm { emb, fwd, bwd }
    }

    pub fn state_dim(&self) -> usize {
        2 * self.fwd.hidden()
    }

    pub fn encode(&self, g: &mut Graph, tokens: &[TokenId]) -> Encoded {
        assert!(!tokens.is_empty(), "cannot encode an empty sentence");
        let xs: Vec<Var> = tokens.iter().map(|&t| g.embed(self.emb, t as usize)).collect();
        let fwd = self.fwd.run(g, &xs);
        let rev: Vec<Var> = xs.iter().rev().copied().collect();
        let mut bwd = self.bwd.run(g, &rev);
        bwd.reverse();
        let states = fwd
            .iter()
            .zip(&bwd)
            .map(|(&f, &b)| g.concat(&[f, b]))
            .collect();
        let sentence = g.concat(&[*fwd.last().unwrap(), bwd[0]]);
        Encoded { states, sentence }
    }
}
