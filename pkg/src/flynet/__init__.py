"""FlyNet visual place recognition: sparse binary encoder, place classifier,
temporal filters (SeqSLAM, RNN, CANN) and PR/AUC evaluation."""

from .cann import CannConfig, CannState, cann_init, cann_run, cann_step
from .classifier import (DenseHead, ScoreVector, TrainConfig, count_footprint, fit, forward,
                         forward_batch, loss_and_grad)
from .config import PipelineConfig, load_config, parse_config
from .dataset import (SynthConfig, Traverse, generate_synthetic, ingest_directory,
                      preprocess_image)
from .encoder import (BinaryDescriptor, EncoderConfig, ProjectionMatrix, build_projection, encode,
                      encode_batch, encode_traverse, hamming_similarity)
from .evaluation import MatchRecord, PrCurve, Tolerance, auc, is_correct, pr_curve, timing_report
from .pipeline import run_pipeline
from .rnn import RnnModel, RnnTrainConfig, fit_rnn, rnn_forward, rnn_loss_and_grads, rnn_match
from .seqslam import DifferenceMatrix, SeqSlamConfig, contrast_enhance, difference_matrix, match

__version__ = "0.1.0"
