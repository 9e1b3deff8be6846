import numpy as np
import pytest

from corrnet.dataset import FeatureMatrix

import pcapgen


@pytest.fixture
def golden_pcap(tmp_path):
    path = tmp_path / "golden_handshake.pcap"
    path.write_bytes(pcapgen.golden_pcap_bytes())
    return path


def make_matrix(columns: dict[str, list[float]], labels: list[str]) -> FeatureMatrix:
    """Small labeled matrix from named columns and 'n'/'m' label letters."""
    feature_ids = tuple(columns)
    values = np.column_stack([np.asarray(columns[f], dtype=float) for f in feature_ids])
    codes = np.asarray([0 if l.startswith("n") else 1 for l in labels], dtype=np.uint8)
    return FeatureMatrix(feature_ids, values, codes,
                         tuple(f"r{i}" for i in range(len(labels))))
