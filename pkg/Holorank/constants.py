# Shipped English stopword list used by the overlap features.
# Bump STOPWORDS_VERSION whenever the list changes; checkpoints record it.
STOPWORDS_VERSION = "1"

STOPWORDS = frozenset(
    """
    a about above after again against all am an and any are as at be because
    been before being below between both but by can could did do does doing
    down during each few for from further had has have having he her here hers
    herself him himself his how i if in into is it its itself just me more most
    my myself no nor not now of off on once only or other our ours ourselves
    out over own same she should so some such than that the their theirs them
    themselves then there these they this those through to too under until up
    very was we were what when where which while who whom why will with would
    you your yours yourself yourselves
    """.split()
)

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD_ID = 0
UNK_ID = 1

# Range of the uniform draw for words missing from the pretrained file.
OOV_INIT_RANGE = 0.25

# Community-QA length filter (tokens, inclusive).
CQA_MIN_TOKENS = 5
CQA_MAX_TOKENS = 50

# Share of dataset token occurrences a checkpoint vocabulary must know before evaluation.
MIN_VOCABULARY_COVERAGE = 0.5

DATASET_FORMATS = ("tsv", "jsonl")
DATASET_FIELDS = ("query_id", "candidate_id", "label", "question", "answer")
