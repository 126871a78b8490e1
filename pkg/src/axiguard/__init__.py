"""Transaction-level AXI4 bus simulation, DoS attack synthesis, and an
ML-based protocol monitor with a quantized fixed-point inference engine."""

from .attacks import (AttackKind, AttackPlan, DEFAULT_ATTACK_MIX,
                      build_attack_corpus, build_plans, compile_plans,
                      inject, verify_label_agreement)
from .axi import (AxiHeader, AxiTransaction, Burst, ChannelEvent,
                  ChannelKind, OracleConfig, OutstandingState, Resp,
                  Violation, ViolationKind, attribute_violations,
                  check_header, check_stream)
from .capture import (CaptureRecord, Dataset, capture, export_csv,
                      export_raw, export_vcd, import_csv, read_raw, read_vcd)
from .features import (FeatureSet, FeatureTransform, FeatureVector,
                       correlation_prune, decode, fit_pipeline,
                       load_feature_csv, pca_fit, save_feature_csv,
                       transform)
from .fixedpoint import (FixedFormat, dequantize, quantize_dequantize,
                         quantize_value, sigmoid_lut)
from .metrics import EvalReport, auc_pairwise, auc_roc, confusion, evaluate
from .mlp import MlpModel, infer, init_model, loss_and_grads, train
from .monitor import (BenchReport, DetectionVerdict, MonitorResult, bench,
                      monitor, write_verdicts_jsonl)
from .quantized import QuantizedMlpModel, train_quantized
from .sampling import smote, split_features, split_indices, take
from .sim import (Arbitration, InjectionScript, MasterProfile, SimConfig,
                  SimTrace, generate_normal_corpus, oracle_config_for,
                  simulate)

__version__ = "0.1.0"
