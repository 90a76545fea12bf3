"""minperm: minimum-permission identification and over-privilege risk scoring.

Given a corpus of apps (description text, declared permissions, API-derived
code permissions, benign/malicious label), the library identifies each app's
description-minimum permission set, flags over-declared permissions, scores
per-app risk, and evaluates detection quality.
"""

__version__ = "0.1.0"
