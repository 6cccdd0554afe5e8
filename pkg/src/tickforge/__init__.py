"""Candle-based price forecasting with technical indicators and boosted trees."""

from tickforge.errors import DataError, TickforgeError, ValidationError
from tickforge.eval_report import EvalReport, mae, r2, rmse
from tickforge.features import FEATURE_NAMES, FeatureMatrix, ScalerParams, assemble, fit_scaler, transform
from tickforge.gbtree import BEST_PRESET, GbtModel, Hyperparams, fit, predict
from tickforge.market_data import Candle, CandleSeries, chronological_split, parse_candles_csv, parse_kline_json
from tickforge.tuning import ParamGrid, grid_search, make_cv_plan, reference_grid

__version__ = "0.1.0"

__all__ = [
    "Candle", "CandleSeries", "DataError", "EvalReport", "FEATURE_NAMES", "FeatureMatrix",
    "GbtModel", "Hyperparams", "BEST_PRESET", "ParamGrid", "ScalerParams", "TickforgeError",
    "ValidationError", "assemble", "chronological_split", "fit", "fit_scaler", "grid_search",
    "mae", "make_cv_plan", "reference_grid", "parse_candles_csv", "parse_kline_json", "predict",
    "r2", "rmse", "transform",
]
