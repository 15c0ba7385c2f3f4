//! Architecture description and flat parameter layout.
//!
//! All parameters live in one flat `Vec<f64>`; the layout assigns each
//! tensor a contiguous range so the optimizer and the gradient checks can
//! treat the model as a single vector. Order: lifting (W, b), then per
//! spectral block (R_re, R_im, pointwise W, pointwise b), then the fully
//! connected head (W, b per layer).
//!
//! Parameter count in closed form:
//!
//! ```text
//! lifting:  w*c_in + w
//! spectral: d_g * (2*k*w^2 + w^2 + w)
//! head:     d_f = 1:  n_out*w + n_out
//!           d_f >= 2: (h*w + h) + (d_f-2)*(h^2 + h) + (n_out*h + n_out)
//! ```

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters of the operator network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchConfig {
    /// Channel width of the spectral trunk.
    pub width: usize,
    /// Number of spectral blocks.
    pub depth: usize,
    /// Retained low-frequency bins per spectral convolution.
    pub k_modes: usize,
    /// Hidden width of the fully connected head.
    pub fc_width: usize,
    /// Number of linear layers in the head.
    pub fc_depth: usize,
    /// Input channels: physical parameters + excitation channels + time.
    pub in_channels: usize,
    /// Output channels: one per modeled DOF.
    pub out_channels: usize,
    /// Time grid length the model is built for.
    pub n_t: usize,
}

impl ArchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0
            || self.depth == 0
            || self.k_modes == 0
            || self.fc_depth == 0
            || self.in_channels == 0
            || self.out_channels == 0
            || self.n_t < 3
        {
            return Err(Error::invalid("architecture dimensions must be positive"));
        }
        if self.fc_depth >= 2 && self.fc_width == 0 {
            return Err(Error::invalid("fc_width must be positive for fc_depth >= 2"));
        }
        let max_modes = self.n_t / 2 + 1;
        if self.k_modes > max_modes {
            return Err(Error::invalid(format!(
                "k_modes = {} exceeds representable bins {} for n_t = {}",
                self.k_modes, max_modes, self.n_t
            )));
        }
        Ok(())
    }

    /// Head layer dimensions: `fc_depth + 1` entries from trunk width to
    /// output channels.
    pub fn head_dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.fc_depth + 1);
        dims.push(self.width);
        for _ in 1..self.fc_depth {
            dims.push(self.fc_width);
        }
        dims.push(self.out_channels);
        dims
    }
}

/// Ranges of one spectral block inside the flat parameter vector.
#[derive(Debug, Clone)]
pub struct BlockLayout {
    /// `k_modes x w x w`, real parts, indexed `[k][out][in]`.
    pub r_re: Range<usize>,
    /// `k_modes x w x w`, imaginary parts.
    pub r_im: Range<usize>,
    /// Pointwise path weight, `w x w`.
    pub pt_w: Range<usize>,
    /// Pointwise path bias, `w`.
    pub pt_b: Range<usize>,
}

/// Flat layout of every tensor.
#[derive(Debug, Clone)]
pub struct Layout {
    pub lift_w: Range<usize>,
    pub lift_b: Range<usize>,
    pub blocks: Vec<BlockLayout>,
    /// Per head layer: (weight range, bias range).
    pub head: Vec<(Range<usize>, Range<usize>)>,
    pub n_params: usize,
}

impl Layout {
    pub fn new(arch: &ArchConfig) -> Layout {
        let w = arch.width;
        let mut off = 0usize;
        let mut take = |len: usize| -> Range<usize> {
            let r = off..off + len;
            off += len;
            r
        };
        let lift_w = take(w * arch.in_channels);
        let lift_b = take(w);
        let mut blocks = Vec::with_capacity(arch.depth);
        for _ in 0..arch.depth {
            blocks.push(BlockLayout {
                r_re: take(arch.k_modes * w * w),
                r_im: take(arch.k_modes * w * w),
                pt_w: take(w * w),
                pt_b: take(w),
            });
        }
        let dims = arch.head_dims();
        let mut head = Vec::with_capacity(arch.fc_depth);
        for l in 0..arch.fc_depth {
            let wr = take(dims[l + 1] * dims[l]);
            let br = take(dims[l + 1]);
            head.push((wr, br));
        }
        Layout {
            lift_w,
            lift_b,
            blocks,
            head,
            n_params: off,
        }
    }

    /// Parameter range of the last spectral block, the shared layer used for
    /// gradient-norm balancing.
    pub fn shared_layer(&self) -> Range<usize> {
        let last = self.blocks.last().expect("at least one block");
        last.r_re.start..last.pt_b.end
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arch() -> ArchConfig {
        ArchConfig {
            width: 36,
            depth: 3,
            k_modes: 16,
            fc_width: 64,
            fc_depth: 2,
            in_channels: 7,
            out_channels: 11,
            n_t: 129,
        }
    }

    #[test]
    fn layout_is_contiguous_and_counts_match() {
        let a = arch();
        let layout = Layout::new(&a);
        // Hand count of the closed form.
        let lifting = 36 * 7 + 36;
        let spectral = 3 * (2 * 16 * 36 * 36 + 36 * 36 + 36);
        let head = (64 * 36 + 64) + (11 * 64 + 11);
        assert_eq!(layout.n_params, lifting + spectral + head);
        // Ranges tile the vector without gaps.
        let mut ranges: Vec<Range<usize>> = vec![layout.lift_w.clone(), layout.lift_b.clone()];
        for b in &layout.blocks {
            ranges.extend([b.r_re.clone(), b.r_im.clone(), b.pt_w.clone(), b.pt_b.clone()]);
        }
        for (w, b) in &layout.head {
            ranges.extend([w.clone(), b.clone()]);
        }
        let mut pos = 0;
        for r in ranges {
            assert_eq!(r.start, pos);
            pos = r.end;
        }
        assert_eq!(pos, layout.n_params);
    }

    #[test]
    fn validation_catches_mode_overflow() {
        let mut a = arch();
        a.n_t = 20;
        a.k_modes = 12; // > 20/2 + 1
        assert!(a.validate().is_err());
        a.k_modes = 11;
        assert!(a.validate().is_ok());
    }

    #[test]
    fn single_layer_head() {
        let mut a = arch();
        a.fc_depth = 1;
        let layout = Layout::new(&a);
        assert_eq!(layout.head.len(), 1);
        let (w, b) = &layout.head[0];
        assert_eq!(w.len(), 11 * 36);
        assert_eq!(b.len(), 11);
    }
}
