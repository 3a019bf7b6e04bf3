import io
from datetime import datetime, timedelta
from importlib import resources
from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp

from icureadmit.cohort import AdmissionRecord, AdmissionType
from icureadmit.dataset import Dataset

DATA_DIR = Path(__file__).parent / "data"
T0 = datetime(2150, 1, 1, 12, 0, 0)


def fixture_path(name):
    return resources.files("icureadmit.data").joinpath("fixtures", name)


def admission(hadm_id, subject_id=1, admit_day=0.0, los_days=2.0, kind="EMERGENCY", expired=False, row_id=None):
    admit = T0 + timedelta(days=admit_day)
    discharge = admit + timedelta(days=los_days)
    return AdmissionRecord(
        row_id=hadm_id if row_id is None else row_id,
        subject_id=subject_id,
        hadm_id=hadm_id,
        admit_time=admit,
        discharge_time=discharge,
        death_time=discharge if expired else None,
        admission_type=AdmissionType(kind),
        hospital_expire_flag=expired,
    )


def dense_dataset(X, y):
    return Dataset(sp.csr_matrix(np.asarray(X, dtype=np.float64)), np.asarray(y, dtype=bool))


def random_sparse_dataset(n, d, density=0.3, seed=0):
    rng = np.random.default_rng(seed)
    X = sp.random(n, d, density=density, format="csr", random_state=seed)
    y = rng.random(n) < 0.5
    y[0], y[1] = True, False
    return Dataset(X, y)


@pytest.fixture
def separable4():
    # Two features; positives on the right.
    return dense_dataset([[1.0, 0.2], [0.9, 0.1], [0.1, 0.8], [0.2, 1.0]], [1, 1, 0, 0])


def csv_bytes(text):
    return io.BytesIO(text.encode("utf-8"))
