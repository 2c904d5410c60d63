import dataclasses
import json
import logging
import os

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)


def format_ratio(value, digits=6):
    return f"{float(value):.{digits}g}"


class CustomJSONEncoder(json.JSONEncoder):
    def default(self, obj):
        if isinstance(obj, np.ndarray):
            if np.iscomplexobj(obj):
                return {"re": obj.real.tolist(), "im": obj.imag.tolist()}
            return obj.tolist()
        if isinstance(obj, np.integer):
            return int(obj)
        if isinstance(obj, np.floating):
            return float(obj)
        if isinstance(obj, np.bool_):
            return bool(obj)
        if isinstance(obj, complex):
            return {"re": obj.real, "im": obj.imag}
        if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
            return dataclasses.asdict(obj)
        if isinstance(obj, tuple):
            return list(obj)
        return super().default(obj)


def to_json(data):
    # sort_keys + indent fixos: mesma entrada produz bytes idênticos
    return json.dumps(data, cls=CustomJSONEncoder, sort_keys=True, indent=2)


def save_json(data, filename, output_dir="results"):
    os.makedirs(output_dir, exist_ok=True)
    path = os.path.join(output_dir, filename)
    with open(path, "w") as f:
        f.write(to_json(data) + "\n")
    logger.info(f"Resumo JSON salvo em {path}")
    return path


def save_csv(rows, filename, output_dir="results"):
    os.makedirs(output_dir, exist_ok=True)
    path = os.path.join(output_dir, filename)
    df = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(rows)
    df.to_csv(path, index=False, float_format="%.17g")
    logger.info(f"{len(df)} linhas salvas em {path}")
    return path
