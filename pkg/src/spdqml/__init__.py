"""SPD-feature hybrid quantum-classical regression on an exact statevector simulator."""
from spdqml._backend import BACKEND
from spdqml.data import Dataset, Scaler, generate_synthetic, load_csv, save_csv
from spdqml.features import SpdProjector, eigendecompose, expand_features
from spdqml.model import ARCHITECTURES, HybridModel, build_model, mse, r2_score
from spdqml.qsim import CircuitSpec, StateVector, circuit_jacobian, run_circuit
from spdqml.train import TrainConfig, TrainReport, evaluate, load_checkpoint, save_checkpoint, train

__version__ = "0.1.0"

__all__ = [
    "ARCHITECTURES", "BACKEND", "CircuitSpec", "Dataset", "HybridModel", "Scaler", "SpdProjector",
    "StateVector", "TrainConfig", "TrainReport", "build_model", "circuit_jacobian", "eigendecompose",
    "evaluate", "expand_features", "generate_synthetic", "load_checkpoint", "load_csv", "mse",
    "r2_score", "run_circuit", "save_checkpoint", "save_csv", "train",
]
