"""Desk-scale in-domain inversion lab for style-based generators.

Train a small generator on a labeled synthetic corpus, learn a domain-guided
encoder against it, optimize latents with a domain-regularized objective, and
edit the results (boundary shifts, interpolation, style mixing, semantic
diffusion) with quantitative evaluation throughout.
"""

from .core import (Image, LatentCode, Mask, SeededRng, full_mask, masked_mse,
                   rescale_pixels, sample_latent, unrescale_pixels)
from .errors import (CheckpointError, CorruptionError, DegenerateMaskError,
                     InvalidArgumentError, InversionFailure, MetricFailure,
                     NotFoundError, TrainingFailure, UnsupportedVersionError)
from .synthesis import (GeneratorConfig, GeneratorModel, MapperConfig,
                        broadcast_w, build_generator, generate, map_z_to_w,
                        mean_w_code, sample_w_code)
from .perception import (FeatureConfig, FeatureExtractor, FeatureTrainConfig,
                         extract_features, perceptual_distance,
                         predict_attributes, train_feature_extractor)
from .training import (DiscriminatorConfig, DiscriminatorModel, EncoderConfig,
                       EncoderModel, TrainingConfig, build_discriminator,
                       build_encoder, conventional_encoder_loss,
                       discriminator_loss, domain_guided_encoder_loss, encode,
                       train_conventional_encoder, train_domain_guided_encoder,
                       train_gan)
from .inversion import (InversionConfig, InversionResult, gradient_check,
                        invert, invert_batch, inversion_objective)
from .editing import (DiffusionSpec, EditSpec, edit_code, interpolate,
                      interpolate_code, manipulate, mixed_code,
                      semantic_diffuse, stitch, style_mix)
from .evaluation import (MetricReport, PRCurve, ProbeReport, SemanticBoundary,
                         classify_codes, code_vector, ffd, fit_boundary,
                         metric_report, mse_metric, pr_curve,
                         semantic_probe_experiment, swd)
from .workspace import (Dataset, DatasetSpec, ExperimentConfig, MetricConfig,
                        load_checkpoint, load_image, load_image_folder,
                        load_saved_dataset, make_synthetic_dataset,
                        save_checkpoint, save_dataset, save_image, save_images)

__version__ = "0.1.0"
