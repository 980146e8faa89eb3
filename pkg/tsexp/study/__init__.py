from study.harness import STUDIES, ReplicateScale, StudyOutput, resample_fixed_outcomes, run_replication

__all__ = ["STUDIES", "ReplicateScale", "StudyOutput", "resample_fixed_outcomes", "run_replication"]
