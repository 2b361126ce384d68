"""Reserved CTC symbols shared by the tokenizers and decoders."""

BLANK = "<blank>"
WORD_BOUNDARY = "<wb>"
UNK = "<unk>"

RESERVED = (BLANK, WORD_BOUNDARY, UNK)
BLANK_ID, WB_ID, UNK_ID = 0, 1, 2
