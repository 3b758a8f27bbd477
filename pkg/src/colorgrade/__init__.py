"""Global color transfer algorithms and KL-based palette evaluation."""

from .exceptions import (ColorSpaceError, ContractError, ConvergenceWarning,
                         DegenerateInputError, DegenerateInputWarning, ImageFormatError)
from .imagecore import (ColorSpace, ImagePlanar, convert, lab_to_rgb, lalphabeta_to_rgb,
                        load_image, quantize, rgb_to_lab, rgb_to_lalphabeta, rgb_to_yiq,
                        save_image, sharpen, yiq_to_rgb)
from .stats import (BandwidthParams, Cdf, DensityEstimate, Histogram, cdf, channel_density,
                    histogram, kde_epanechnikov, kl_divergence, kl_sample_epanechnikov,
                    variable_bandwidth)
from .transfer_linear import (AffineColorMap, AffineMethod, ChannelStats, apply_affine,
                              channel_stats, linear_transfer, matched_affine, reinhard_transfer)
from .transfer_idt import IdtTrace, LookupTable1D, idt, pdf_transfer_1d, random_rotation
from .regrain import RegrainWeights, SolverConfig, regrain, weight_phi, weight_psi
from .transfer_hist import (EqualizationMap, equalize, equalize_channel, luminance_transfer,
                            match_histogram)
from .nst_loss import (FeatureMap, LossWeights, content_loss, gram, loss_gradients, style_loss,
                       style_layer_loss, total_loss, total_variation_loss)
from .evalreport import (METHOD_IDS, MethodRegistry, SuiteConfig, TransferReport, export_report,
                         run_suite)

__version__ = "0.1.0"
