use serde::{Deserialize, Serialize};

use super::arch::ArchitectureSpec;
use super::scalar::Scalar;

/// Name, shape and position of one tensor inside a flat parameter buffer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

/// All network parameters in one contiguous buffer.
///
/// Conv layer `l` owns `conv{l}.weight` `[c_out, c_in, 3, 3]` and
/// `conv{l}.bias` `[c_out]`; the head owns `fc.weight` `[c_last]` and
/// `fc.bias` `[1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<T> {
    pub data: Vec<T>,
    pub slots: Vec<Slot>,
}

pub fn layout(arch: &ArchitectureSpec) -> Vec<Slot> {
    let mut slots = Vec::new();
    let mut offset = 0;
    let mut push = |name: String, shape: Vec<usize>| {
        let len = shape.iter().product();
        slots.push(Slot { name, shape, offset, len });
        offset += len;
    };
    for (l, conv) in arch.convs().iter().enumerate() {
        push(format!("conv{l}.weight"), vec![conv.c_out, conv.c_in, 3, 3]);
        push(format!("conv{l}.bias"), vec![conv.c_out]);
    }
    push("fc.weight".into(), vec![arch.final_channels()]);
    push("fc.bias".into(), vec![1]);
    slots
}

impl<T: Scalar> ParamSet<T> {
    pub fn zeros(arch: &ArchitectureSpec) -> Self {
        let slots = layout(arch);
        let total = slots.last().map(|s| s.offset + s.len).unwrap_or(0);
        Self { data: vec![T::zero(); total], slots }
    }

    pub fn zeros_like(&self) -> Self {
        Self { data: vec![T::zero(); self.data.len()], slots: self.slots.clone() }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Conv layer `l` weight slice.
    pub fn conv_weight(&self, l: usize) -> &[T] {
        self.slice(2 * l)
    }

    pub fn conv_bias(&self, l: usize) -> &[T] {
        self.slice(2 * l + 1)
    }

    pub fn fc_weight(&self) -> &[T] {
        self.slice(self.slots.len() - 2)
    }

    pub fn fc_bias(&self) -> T {
        self.slice(self.slots.len() - 1)[0]
    }

    pub fn slice(&self, slot: usize) -> &[T] {
        let s = &self.slots[slot];
        &self.data[s.offset..s.offset + s.len]
    }

    pub fn slice_mut(&mut self, slot: usize) -> &mut [T] {
        let s = &self.slots[slot];
        &mut self.data[s.offset..s.offset + s.len]
    }

    pub fn cast<U: Scalar>(&self) -> ParamSet<U> {
        ParamSet {
            data: self.data.iter().map(|v| U::of_f64(v.as_f64())).collect(),
            slots: self.slots.clone(),
        }
    }
}
