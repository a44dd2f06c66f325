use super::NetworkConfig;

/// One 3×3 convolution of the U-Net.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: &'static str,
    pub in_channels: usize,
    pub out_channels: usize,
    pub stride: usize,
    pub batchnorm: bool,
    /// Downsampling factor of the layer input relative to the image.
    pub in_scale: usize,
    /// Downsampling factor of the layer output.
    pub out_scale: usize,
}

pub const KERNEL: usize = 3;

/// Encoder conv1..conv5, decoder conv6..conv8 (each after a 2× bilinear
/// upsample and a skip concatenation), head conv9.
pub fn layer_specs(config: &NetworkConfig) -> Vec<LayerSpec> {
    let l = |name, in_channels, out_channels, stride, in_scale, out_scale| LayerSpec {
        name,
        in_channels,
        out_channels,
        stride,
        batchnorm: true,
        in_scale,
        out_scale,
    };
    vec![
        l("conv1", config.input_channels(), 16, 1, 1, 1),
        l("conv2", 16, 32, 2, 1, 2),
        l("conv3", 32, 64, 2, 2, 4),
        l("conv4", 64, 128, 2, 4, 8),
        l("conv5", 128, 128, 1, 8, 8),
        l("conv6", 128 + 64, 64, 1, 4, 4),
        l("conv7", 64 + 32, 32, 1, 2, 2),
        l("conv8", 32 + 16, 16, 1, 1, 1),
        LayerSpec {
            batchnorm: false,
            ..l("conv9", 16, config.output_channels(), 1, 1, 1)
        },
    ]
}

impl LayerSpec {
    pub fn weight_count(&self) -> usize {
        KERNEL * KERNEL * self.in_channels * self.out_channels
    }

    /// Conv weights and bias plus batch-norm scale and shift.
    pub fn param_count(&self) -> usize {
        self.weight_count() + self.out_channels + if self.batchnorm { 2 * self.out_channels } else { 0 }
    }
}
