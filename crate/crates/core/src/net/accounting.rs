use super::layers::{layer_specs, KERNEL};
use super::model::STRIDE_MULTIPLE;
use super::{Centering, NetworkConfig};

/// Closed-form count of learnable scalars: conv weights and biases plus
/// batch-norm scale and shift. Running statistics are not parameters.
pub fn param_count(config: &NetworkConfig) -> usize {
    layer_specs(config).iter().map(|l| l.param_count()).sum()
}

/// How a multiply-accumulate is counted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OpCounting {
    /// One op per multiply-accumulate.
    #[default]
    MultiplyAccumulate,
    /// A multiply and an add per multiply-accumulate.
    SeparateMulAdd,
}

/// Per-plane operation tally for an `H×W` render.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct OpTally {
    pub macs: u64,
    pub other: u64,
}

impl OpTally {
    pub fn ops(&self, counting: OpCounting) -> u64 {
        match counting {
            OpCounting::MultiplyAccumulate => self.macs + self.other,
            OpCounting::SeparateMulAdd => 2 * self.macs + self.other,
        }
    }
}

fn round_up(v: usize) -> usize {
    v.div_ceil(STRIDE_MULTIPLE) * STRIDE_MULTIPLE
}

/// Work for one plane: warping every view, the network on the padded input,
/// weight normalization, blending and compositing.
pub fn plane_ops(config: &NetworkConfig, height: usize, width: usize) -> OpTally {
    let (ph, pw) = (round_up(height) as u64, round_up(width) as u64);
    let pixels = (height * width) as u64;
    let v = config.num_views as u64;
    let mut t = OpTally::default();
    // bilinear warp: 4 taps per colour channel per view
    t.macs += 4 * 3 * v * pixels;
    for l in layer_specs(config) {
        let out_px = (ph / l.out_scale as u64) * (pw / l.out_scale as u64);
        t.macs += (KERNEL * KERNEL * l.in_channels) as u64 * l.out_channels as u64 * out_px;
        t.other += l.out_channels as u64 * out_px;
        if l.batchnorm {
            // folded scale-and-shift plus ReLU
            t.macs += l.out_channels as u64 * out_px;
            t.other += l.out_channels as u64 * out_px;
        }
    }
    // three bilinear upsamples, 4 taps per output element
    for (c, s) in [(128u64, 4u64), (64, 2), (32, 1)] {
        t.macs += 4 * c * (ph / s) * (pw / s);
    }
    // sigmoid and softmax (exp, sum, divide) on the head
    t.other += pixels * (3 + 3 * config.weight_channels() as u64);
    // distance normalization, blend, over-composite
    t.other += 2 * v * pixels;
    t.macs += 3 * v * pixels;
    t.macs += 3 * pixels;
    if config.centering == Centering::Input {
        // warp of the RGBA plane to the target
        t.macs += 4 * 4 * pixels;
    }
    t
}

/// Operations per output pixel for `planes` planes at `H×W`.
pub fn opx_count(config: &NetworkConfig, planes: usize, height: usize, width: usize, counting: OpCounting) -> f64 {
    let total = plane_ops(config, height, width).ops(counting) * planes as u64;
    total as f64 / (height * width) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{HeadMode, PlaneContext};

    fn v5(head: HeadMode) -> NetworkConfig {
        NetworkConfig::new(5).unwrap().with_head(head)
    }

    #[test]
    fn per_layer_counts() {
        let specs = layer_specs(&v5(HeadMode::PaperVminus1));
        let conv = |i: usize| specs[i].weight_count() + specs[i].out_channels;
        assert_eq!(conv(0), 2_176);
        assert_eq!(conv(1), 4_640);
        assert_eq!(conv(2), 18_496);
        assert_eq!(conv(3), 73_856);
        assert_eq!(conv(4), 147_584);
        assert_eq!(conv(5), 110_656);
        assert_eq!(conv(6), 27_680);
        assert_eq!(conv(7), 6_928);
        assert_eq!(conv(8), 725);
        assert_eq!(conv(8) + 145, 870);
    }

    #[test]
    fn totals_for_five_views() {
        assert_eq!(param_count(&v5(HeadMode::PaperVminus1)), 393_701);
        assert_eq!(param_count(&v5(HeadMode::SoftmaxV)), 393_846);
        for head in [HeadMode::PaperVminus1, HeadMode::SoftmaxV] {
            let rel = (param_count(&v5(head)) as f64 - 391_000.0).abs() / 391_000.0;
            assert!(rel < 0.02);
        }
    }

    #[test]
    fn opx_is_linear_in_planes() {
        for ctx in [PlaneContext::Dynamic, PlaneContext::Static] {
            for cent in [Centering::Target, Centering::Input] {
                let c = v5(HeadMode::SoftmaxV).with_context(ctx).with_centering(cent);
                let full = opx_count(&c, 64, 350, 500, OpCounting::default());
                assert_eq!(opx_count(&c, 32, 350, 500, OpCounting::default()) * 2.0, full);
                assert_eq!(opx_count(&c, 16, 350, 500, OpCounting::default()) * 4.0, full);
            }
        }
    }

    #[test]
    fn opx_lands_near_the_published_figure() {
        let c = v5(HeadMode::SoftmaxV);
        let opx = opx_count(&c, 64, 350, 500, OpCounting::MultiplyAccumulate);
        assert!(opx > 1.79e6 / 2.0 && opx < 1.79e6 * 2.0, "{opx}");
        let separate = opx_count(&c, 64, 350, 500, OpCounting::SeparateMulAdd);
        assert!(separate > opx * 1.9);
    }
}
