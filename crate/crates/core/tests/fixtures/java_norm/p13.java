public class Literals {
    public static void main(String[] args) {
        long big = 5000000000L;
        double ratio = 0.25e1;
        float part = 1.5f;
        char mark = 'x';
        int mask = 0xFF;
        int shifted = (int) (big % 97L) + mask;
        System.out.println(shifted + (int) part + (int) ratio + mark);
    }
}
