from export.results import ResultWriter, load_schema, result_payload

__all__ = ["ResultWriter", "load_schema", "result_payload"]
