from typing import List, Union

from pydantic import BaseModel


class FieldError(BaseModel):
    loc: List[Union[str, int]]
    msg: str
    type: str


class ScenarioValidationReport(BaseModel):
    detail: List[FieldError]

    def first_field(self) -> str:
        if not self.detail or not self.detail[0].loc:
            return "document"
        return ".".join(str(part) for part in self.detail[0].loc)
