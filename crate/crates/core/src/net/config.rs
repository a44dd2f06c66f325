use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};

/// How the weight head maps onto views.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HeadMode {
    /// `1 + V` output channels: alpha plus one weight per view.
    #[default]
    SoftmaxV,
    /// `V` output channels: alpha plus `V − 1` weights for views `0..V−1`;
    /// the last view always gets weight 0.
    PaperVminus1,
}

/// Which camera the MPI is built at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// Planes fronto-parallel to the target camera.
    #[default]
    Target,
    /// Planes fronto-parallel to a reference input camera, warped to the
    /// target at render time.
    Input,
}

/// What the network sees for one plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PlaneContext {
    /// Only the plane's own `3V` warped views: any plane count or spacing.
    #[default]
    Dynamic,
    /// The plane and its two neighbours in the stack (`9V` channels), which
    /// ties the network to the plane spacing it was trained with.
    Static,
}

macro_rules! code_enum {
    ($t:ty, $($v:ident = $c:expr),+) => {
        impl $t {
            pub fn code(self) -> u32 {
                match self { $(Self::$v => $c),+ }
            }

            pub fn from_code(code: u32) -> Result<Self> {
                match code {
                    $($c => Ok(Self::$v),)+
                    _ => contract(format!("unknown {} code {code}", stringify!($t))),
                }
            }
        }
    };
}

code_enum!(HeadMode, SoftmaxV = 0, PaperVminus1 = 1);
code_enum!(Centering, Target = 0, Input = 1);
code_enum!(PlaneContext, Dynamic = 0, Static = 1);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub num_views: usize,
    pub head_mode: HeadMode,
    pub centering: Centering,
    pub context: PlaneContext,
}

impl NetworkConfig {
    pub fn new(num_views: usize) -> Result<Self> {
        let c = Self {
            num_views,
            head_mode: HeadMode::default(),
            centering: Centering::default(),
            context: PlaneContext::default(),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_head(mut self, head_mode: HeadMode) -> Self {
        self.head_mode = head_mode;
        self
    }

    pub fn with_centering(mut self, centering: Centering) -> Self {
        self.centering = centering;
        self
    }

    pub fn with_context(mut self, context: PlaneContext) -> Self {
        self.context = context;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_views < 2 {
            return contract(format!("need at least 2 views, got {}", self.num_views));
        }
        Ok(())
    }

    pub fn input_channels(&self) -> usize {
        match self.context {
            PlaneContext::Dynamic => 3 * self.num_views,
            PlaneContext::Static => 9 * self.num_views,
        }
    }

    /// Weight channels the head predicts (before padding to `V`).
    pub fn weight_channels(&self) -> usize {
        match self.head_mode {
            HeadMode::SoftmaxV => self.num_views,
            HeadMode::PaperVminus1 => self.num_views - 1,
        }
    }

    pub fn output_channels(&self) -> usize {
        1 + self.weight_channels()
    }
}
