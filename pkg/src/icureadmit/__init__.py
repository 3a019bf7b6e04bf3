"""30-day unplanned ICU readmission prediction from discharge summaries.

Cohort extraction from ADMISSIONS/NOTEEVENTS tables, Bag-of-Words and
Bag-of-CUIs tf-idf features, five classifiers and AUC evaluation.
"""

__version__ = "0.1.0"
